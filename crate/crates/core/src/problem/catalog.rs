//! Built-in test problems.
//!
//! | name                   | f     | L                              | g                                 |
//! |------------------------|-------|--------------------------------|-----------------------------------|
//! | `tracking_box_1d`      | y^3   | tracking of `2 sin(pi x)`, nu=0.1 | `u - (1 + 0.3 t)`              |
//! | `tracking_box_2d`      | y^3   | tracking of `2 sin(pi x1) sin(pi x2)` | `u - (1 + 0.3 t)`          |
//! | `example31_poly`       | y^3   | tracking of `2 sin(pi x) cos(pi t)` | `y^4 u^3 + (y^2 + 1) u`      |
//! | `mms_cubic_1d`         | y^3   | tracking of a manufactured pair | `u - u_ms - 1` (never active)    |
//! | `strictly_feasible_1d` | y     | as `tracking_box_1d`           | `u - 10` (never active)           |
//!
//! All live on unit boxes with horizon 1 and `A = -Laplace`. The
//! manufactured pair is `y_ms = sin(pi x) e^{-t}` with forcing
//! `u_ms = (pi^2 - 1) sin(pi x) e^{-t} + sin(pi x)^3 e^{-3t}`.

use std::f64::consts::PI;

use super::{Map, Nonlinearity, ProblemSpec, Range, SampleBox, ScalarMap2};
use crate::error::{Error, Result};

const NAMES: [&str; 5] = [
    "tracking_box_1d",
    "tracking_box_2d",
    "example31_poly",
    "mms_cubic_1d",
    "strictly_feasible_1d",
];

pub fn catalog_names() -> &'static [&'static str] {
    &NAMES
}

/// Exact state of `mms_cubic_1d`.
pub fn mms_exact_state(x: f64, t: f64) -> f64 {
    (PI * x).sin() * (-t).exp()
}

/// Forcing that makes [`mms_exact_state`] solve `y_t - y_xx + y^3 = u`.
pub fn mms_forcing(x: f64, t: f64) -> f64 {
    let s = (PI * x).sin();
    (PI * PI - 1.0) * s * (-t).exp() + s.powi(3) * (-3.0 * t).exp()
}

const NU: f64 = 0.1;

fn tracking(target: &str) -> Result<ScalarMap2> {
    ScalarMap2::parse([
        &format!("0.5*(y - {target})^2 + 0.05*u^2"),
        &format!("y - {target}"),
        "0.1*u",
        "1",
        "0",
        "0.1",
    ])
}

fn cubic() -> Result<Nonlinearity> {
    Nonlinearity::parse("y^3", "3*y^2", "6*y", 0.0)
}

fn unit_box(name: &str, dim: usize) -> ProblemSpec {
    ProblemSpec {
        name: name.to_string(),
        dim,
        extents: vec![1.0; dim],
        horizon: 1.0,
        coefficients: ProblemSpec::identity_coefficients(dim),
        f: Nonlinearity::parse("0", "0", "0", 0.0).expect("literal"),
        lagrangian: ScalarMap2::parse(["0", "0", "0", "0", "0", "0"]).expect("literal"),
        constraint: ScalarMap2::parse(["0", "0", "0", "0", "0", "0"]).expect("literal"),
        y0: Map::constant(0.0),
        gamma1: NU,
        gamma2: 1.0,
        sample_box: SampleBox {
            y: Range::new(-3.0, 3.0),
            u: Range::new(-5.0, 5.0),
        },
    }
}

/// Looks up a catalog problem by name.
pub fn builtin_problem(name: &str) -> Result<ProblemSpec> {
    let mut spec = match name {
        "tracking_box_1d" => ProblemSpec {
            f: cubic()?,
            lagrangian: tracking("2*sin(pi*x1)")?,
            constraint: ScalarMap2::parse(["u - 1 - 0.3*t", "0", "1", "0", "0", "0"])?,
            ..unit_box(name, 1)
        },
        "tracking_box_2d" => ProblemSpec {
            f: cubic()?,
            lagrangian: tracking("2*sin(pi*x1)*sin(pi*x2)")?,
            constraint: ScalarMap2::parse(["u - 1 - 0.3*t", "0", "1", "0", "0", "0"])?,
            ..unit_box(name, 2)
        },
        "example31_poly" => ProblemSpec {
            f: cubic()?,
            lagrangian: tracking("2*sin(pi*x1)*cos(pi*t)")?,
            constraint: ScalarMap2::parse([
                "y^4*u^3 + (y^2 + 1)*u",
                "4*y^3*u^3 + 2*y*u",
                "3*y^4*u^2 + y^2 + 1",
                "12*y^2*u^3 + 2*u",
                "12*y^3*u^2 + 2*y",
                "6*y^4*u",
            ])?,
            sample_box: SampleBox {
                y: Range::new(-2.0, 2.0),
                u: Range::new(-2.0, 2.0),
            },
            ..unit_box(name, 1)
        },
        "mms_cubic_1d" => {
            let ys = "sin(pi*x1)*exp(-t)";
            let us = "((pi^2 - 1)*sin(pi*x1)*exp(-t) + sin(pi*x1)^3*exp(-3*t))";
            ProblemSpec {
                f: cubic()?,
                lagrangian: ScalarMap2::parse([
                    &format!("0.5*(y - {ys})^2 + 0.05*(u - {us})^2"),
                    &format!("y - {ys}"),
                    &format!("0.1*(u - {us})"),
                    "1",
                    "0",
                    "0.1",
                ])?,
                constraint: ScalarMap2::parse([&format!("u - {us} - 1"), "0", "1", "0", "0", "0"])?,
                y0: Map::parse("sin(pi*x1)")?,
                sample_box: SampleBox {
                    y: Range::new(-2.0, 2.0),
                    u: Range::new(-15.0, 15.0),
                },
                ..unit_box(name, 1)
            }
        }
        "strictly_feasible_1d" => ProblemSpec {
            f: Nonlinearity::parse("y", "1", "0", 1.0)?,
            lagrangian: tracking("2*sin(pi*x1)")?,
            constraint: ScalarMap2::parse(["u - 10", "0", "1", "0", "0", "0"])?,
            ..unit_box(name, 1)
        },
        _ => {
            return Err(Error::UnknownProblem {
                name: name.to_string(),
                available: NAMES.join(", "),
            })
        }
    };
    spec.name = name.to_string();
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{check_partials, validate_hypotheses};

    #[test]
    fn every_catalog_problem_passes_its_audit() {
        for name in catalog_names() {
            let spec = builtin_problem(name).unwrap();
            let r = validate_hypotheses(&spec, &spec.sample_box, 2000, 5).unwrap();
            assert!(r.all_pass(), "{name}: {r:?}");
            let pc = check_partials(&spec, 100, 9);
            assert!(pc.worst_relative_error <= 1e-5, "{name}: {pc:?}");
        }
    }

    #[test]
    fn tracking_box_constants() {
        let spec = builtin_problem("tracking_box_1d").unwrap();
        let r = validate_hypotheses(&spec, &spec.sample_box, 500, 0).unwrap();
        assert_eq!(r.min_luu, 0.1);
        assert_eq!(r.min_gu, 1.0);
        assert_eq!(spec.gamma1, 0.1);
        assert_eq!(spec.gamma2, 1.0);
    }

    #[test]
    fn example31_uses_third_formula() {
        let spec = builtin_problem("example31_poly").unwrap();
        let g = &spec.constraint;
        let (y, u): (f64, f64) = (0.7, -1.3);
        let want = y.powi(4) * u.powi(3) + (y * y + 1.0) * u;
        assert!((g.value.at(&[0.2], 0.4, y, u) - want).abs() < 1e-14);
    }

    #[test]
    fn manufactured_pair_satisfies_the_pde() {
        // finite-difference residual of the closed forms, independent of the solver
        let h = 1e-4;
        for &(x, t) in &[(0.3, 0.2), (0.71, 0.9), (0.5, 0.0)] {
            let yt = (mms_exact_state(x, t + h) - mms_exact_state(x, t - h)) / (2.0 * h);
            let yxx = (mms_exact_state(x + h, t) - 2.0 * mms_exact_state(x, t)
                + mms_exact_state(x - h, t))
                / (h * h);
            let y = mms_exact_state(x, t);
            let res = yt - yxx + y.powi(3) - mms_forcing(x, t);
            assert!(res.abs() < 1e-5, "residual {res} at ({x}, {t})");
        }
        let spec = builtin_problem("mms_cubic_1d").unwrap();
        let lu = spec
            .lagrangian
            .du
            .at(&[0.3], 0.2, 0.0, mms_forcing(0.3, 0.2));
        assert!(lu.abs() < 1e-14);
    }

    #[test]
    fn unknown_name_lists_catalog() {
        match builtin_problem("nope") {
            Err(Error::UnknownProblem { available, .. }) => {
                for n in NAMES {
                    assert!(available.contains(n));
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
