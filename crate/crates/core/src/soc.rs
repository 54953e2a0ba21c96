//! Second-order diagnostics at a KKT point: the Lagrangian quadratic form,
//! approximate critical directions, the Legendre bound and a quadratic
//! growth probe.
//!
//! Integrals over `Q` use the slab weights of the discrete objective
//! (levels `1..nt`), so the quadratic form is exactly the second variation
//! of the discrete Lagrangian.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field_io::fmt17;
use crate::grid::{Grid, SpaceTimeField};
use crate::kkt::{
    active_threshold, boundary_field, constraint_field, objective, KktPoint, TOL_FEAS,
};
use crate::problem::ProblemSpec;
use crate::solvers::{ParabolicSolver, SolverOptions};

/// Smooth random field: a few separable sine/cosine modes with random
/// amplitudes, zero on level 0.
pub(crate) fn smooth_random_field(
    grid: &std::sync::Arc<Grid>,
    rng: &mut ChaCha8Rng,
) -> SpaceTimeField {
    let modes: Vec<(f64, usize, usize, usize, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(1..4),
                rng.gen_range(1..4),
                rng.gen_range(0..3),
                rng.gen_range(0.0..PI),
            )
        })
        .collect();
    let ext = grid.space.extents().to_vec();
    let horizon = grid.time.horizon();
    let mut v = SpaceTimeField::from_fn(grid, |x, t| {
        modes
            .iter()
            .map(|&(a, m1, m2, k, shift)| {
                let sx = (m1 as f64 * PI * x[0] / ext[0]).sin();
                let sy = if ext.len() > 1 {
                    (m2 as f64 * PI * x[1] / ext[1]).sin()
                } else {
                    1.0
                };
                a * sx * sy * (k as f64 * PI * t / horizon + shift).cos()
            })
            .sum()
    });
    v.level_mut(0).fill(0.0);
    v
}

#[derive(Clone, Debug)]
pub struct CriticalDirection {
    /// Control perturbation, zero on level 0.
    pub v: SpaceTimeField,
    /// Linearized state for `v`.
    pub y: SpaceTimeField,
    /// `int (L_y y + L_u v)`.
    pub c1_value: f64,
    pub c1_satisfied: bool,
    /// Max-norm residual of the linearized state equation.
    pub c2_residual: f64,
    /// Largest violation of the linearized constraint on (nearly) active
    /// nodes; on strongly active nodes the equality is measured.
    pub c3_violation: f64,
}

/// Solves `z_t + A z + f'(y) z = v`, `z(0) = 0`.
pub fn linearized_state(
    solver: &ParabolicSolver<'_>,
    y_bar: &SpaceTimeField,
    v: &SpaceTimeField,
) -> Result<SpaceTimeField> {
    let c = y_bar.map(|y| solver.spec().f.slope(y));
    solver.solve_linear(&c, v, &vec![0.0; solver.grid().n_interior()], false)
}

fn linearized_residual(
    solver: &ParabolicSolver<'_>,
    y_bar: &SpaceTimeField,
    v: &SpaceTimeField,
    z: &SpaceTimeField,
) -> f64 {
    let grid = solver.grid();
    let n = grid.n_interior();
    let tau = grid.time.step();
    let mut az = vec![0.0; n];
    let mut r = z.level(0).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for j in 1..grid.levels() {
        solver.operator().matvec(z.level(j), &mut az);
        for k in 0..n {
            let res = (z[(j, k)] - z[(j - 1, k)]) / tau
                + az[k]
                + solver.spec().f.slope(y_bar[(j, k)]) * z[(j, k)]
                - v[(j, k)];
            r = r.max(res.abs());
        }
    }
    r
}

/// Re-measures the cone flags of `(v, y)` at `point`.
pub fn measure_direction(
    solver: &ParabolicSolver<'_>,
    point: &KktPoint,
    v: SpaceTimeField,
    y: SpaceTimeField,
) -> Result<CriticalDirection> {
    let spec = solver.spec();
    let grid = solver.grid().clone();
    let g = constraint_field(spec, &point.y, &point.u)?;
    let eps_act = active_threshold(&point.e);
    let mut c1 = 0.0;
    let mut c1_scale = 0.0;
    let mut c3 = 0.0f64;
    for j in 1..grid.levels() {
        let t = grid.time.time(j);
        for k in 0..grid.n_interior() {
            let x = solver.x(k);
            let (yb, ub) = (point.y[(j, k)], point.u[(j, k)]);
            let ly = spec.lagrangian.dy.at(x, t, yb, ub);
            let lu = spec.lagrangian.du.at(x, t, yb, ub);
            c1 += ly * y[(j, k)] + lu * v[(j, k)];
            c1_scale += (ly * y[(j, k)]).abs() + (lu * v[(j, k)]).abs();
            if g[(j, k)] >= -TOL_FEAS {
                let lin = spec.constraint.dy.at(x, t, yb, ub) * y[(j, k)]
                    + spec.constraint.du.at(x, t, yb, ub) * v[(j, k)];
                let viol = if point.e[(j, k)] > eps_act {
                    lin.abs()
                } else {
                    lin.max(0.0)
                };
                c3 = c3.max(viol);
            }
        }
    }
    let w = grid.slab_weight();
    let c1_value = c1 * w;
    Ok(CriticalDirection {
        c2_residual: linearized_residual(solver, &point.y, &v, &y),
        c1_satisfied: c1_value <= 1e-10 * (1.0 + c1_scale * w),
        c1_value,
        c3_violation: c3,
        v,
        y,
    })
}

/// Second variation of the discrete Lagrangian along `dir`.
pub fn quadratic_form(
    spec: &ProblemSpec,
    point: &KktPoint,
    dir: &CriticalDirection,
) -> Result<f64> {
    point.check_aligned()?;
    point.y.check_aligned(&dir.v, "direction")?;
    point.y.check_aligned(&dir.y, "linearized state")?;
    let grid = point.y.grid();
    let mut q = 0.0;
    for j in 1..grid.levels() {
        let t = grid.time.time(j);
        for k in 0..grid.n_interior() {
            let xc = grid.space.interior_coords(k);
            let x = &xc[..spec.dim];
            let (yb, ub) = (point.y[(j, k)], point.u[(j, k)]);
            let (z, v) = (dir.y[(j, k)], dir.v[(j, k)]);
            let l = spec.lagrangian.jet(x, t, yb, ub);
            let g = spec.constraint.jet(x, t, yb, ub);
            let e = point.e[(j, k)];
            q += l.dyy * z * z
                + 2.0 * l.dyu * z * v
                + l.duu * v * v
                + e * (g.dyy * z * z + 2.0 * g.dyu * z * v + g.duu * v * v)
                + point.phi[(j, k)] * spec.f.curvature(yb) * z * z;
        }
    }
    Ok(q * grid.slab_weight())
}

/// Draws a smooth direction and projects it toward the critical cone.
pub fn sample_critical_direction_with(
    solver: &ParabolicSolver<'_>,
    point: &KktPoint,
    seed: u64,
) -> Result<CriticalDirection> {
    let spec = solver.spec();
    let grid = solver.grid().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = smooth_random_field(&grid, &mut rng);
    let g = constraint_field(spec, &point.y, &point.u)?;
    let eps_act = active_threshold(&point.e);
    let project = |mut v: SpaceTimeField| -> Result<CriticalDirection> {
        for _ in 0..2 {
            let z = linearized_state(solver, &point.y, &v)?;
            for j in 1..grid.levels() {
                let t = grid.time.time(j);
                for k in 0..grid.n_interior() {
                    if g[(j, k)] < -TOL_FEAS {
                        continue;
                    }
                    let x = solver.x(k);
                    let (yb, ub) = (point.y[(j, k)], point.u[(j, k)]);
                    let gy = spec.constraint.dy.at(x, t, yb, ub);
                    let gu = spec.constraint.du.at(x, t, yb, ub);
                    let tangent = -gy / gu * z[(j, k)];
                    if point.e[(j, k)] > eps_act || v[(j, k)] > tangent {
                        v[(j, k)] = tangent;
                    }
                }
            }
        }
        let z = linearized_state(solver, &point.y, &v)?;
        measure_direction(solver, point, v, z)
    };
    let mut dir = project(raw.clone())?;
    if !dir.c1_satisfied {
        dir = project(raw.map(|v| -v))?;
    }
    if dir.c3_violation > 1e-6 {
        return Err(Error::DirectionRejected(format!(
            "c3 violation {:e} after projection (c1 = {:e}, c2 residual {:e})",
            dir.c3_violation, dir.c1_value, dir.c2_residual
        )));
    }
    Ok(dir)
}

pub fn sample_critical_direction(
    spec: &ProblemSpec,
    point: &KktPoint,
    seed: u64,
) -> Result<CriticalDirection> {
    let solver = ParabolicSolver::new(spec, point.y.grid(), SolverOptions::default())?;
    sample_critical_direction_with(&solver, point, seed)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LegendreMin {
    pub value: f64,
    pub level: usize,
    pub node: usize,
    pub x: [f64; 2],
    pub t: f64,
}

/// Minimum of `L_uu + e g_uu` over all nodes.
pub fn legendre_min(spec: &ProblemSpec, point: &KktPoint) -> Result<LegendreMin> {
    point.check_aligned()?;
    let grid = point.y.grid();
    let mut best = LegendreMin {
        value: f64::INFINITY,
        level: 0,
        node: 0,
        x: [0.0; 2],
        t: 0.0,
    };
    for j in 0..grid.levels() {
        let t = grid.time.time(j);
        for k in 0..grid.n_interior() {
            let xc = grid.space.interior_coords(k);
            let x = &xc[..spec.dim];
            let (yb, ub) = (point.y[(j, k)], point.u[(j, k)]);
            let v = spec.lagrangian.duu.at(x, t, yb, ub)
                + point.e[(j, k)] * spec.constraint.duu.at(x, t, yb, ub);
            if v < best.value {
                best = LegendreMin {
                    value: v,
                    level: j,
                    node: k,
                    x: xc,
                    t,
                };
            }
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthTrial {
    pub trial: usize,
    /// `(J - J_bar) / |u - u_bar|^2`; NaN for dropped trials.
    pub ratio: f64,
    pub norm_du: f64,
    pub feasible: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthProbe {
    /// Smallest ratio over feasible trials.
    pub kappa_hat: f64,
    pub trials: Vec<GrowthTrial>,
    pub dropped: usize,
}

impl GrowthProbe {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("trial,ratio,norm_du,feasible\n");
        for t in &self.trials {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                t.trial,
                fmt17(t.ratio),
                fmt17(t.norm_du),
                t.feasible
            );
        }
        s
    }
}

/// Perturbs the control by smooth random fields of max norm at most
/// `radius` and records the objective increase relative to `|du|^2`.
pub fn quadratic_growth_probe_with(
    solver: &ParabolicSolver<'_>,
    point: &KktPoint,
    n_trials: usize,
    radius: f64,
    seed: u64,
) -> Result<GrowthProbe> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let spec = solver.spec();
    let grid = solver.grid();
    let j_bar = objective(spec, &point.y, &point.u);
    let mut trials = Vec::with_capacity(n_trials);
    let mut dropped = 0;
    for trial in 0..n_trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64));
        let mut du = smooth_random_field(grid, &mut rng);
        let scale = radius * rng.gen_range(0.2..=1.0) / du.max_abs().max(f64::MIN_POSITIVE);
        du = du.map(|v| v * scale);
        let mut u = point.u.zip_map(&du, |a, b| a + b);
        for _ in 0..2 {
            let (y, _) = solver.solve_state(&u)?;
            let b = boundary_field(spec, &y)?;
            u = u.zip_map(&b, |a, b| a.min(b));
        }
        let (y, _) = solver.solve_state(&u)?;
        let g = constraint_field(spec, &y, &u)?;
        let diff = u.zip_map(&point.u, |a, b| a - b);
        let norm = grid.control_norm(&diff);
        let feasible = g.as_slice()[grid.n_interior()..]
            .iter()
            .all(|&v| v <= TOL_FEAS);
        if !feasible || norm < 1e-8 {
            dropped += 1;
            trials.push(GrowthTrial {
                trial,
                ratio: f64::NAN,
                norm_du: norm,
                feasible: false,
            });
            continue;
        }
        let ratio = (objective(spec, &y, &u) - j_bar) / (norm * norm);
        trials.push(GrowthTrial {
            trial,
            ratio,
            norm_du: norm,
            feasible,
        });
    }
    let kappa_hat = trials
        .iter()
        .filter(|t| t.feasible)
        .fold(f64::INFINITY, |m, t| m.min(t.ratio));
    Ok(GrowthProbe {
        kappa_hat,
        trials,
        dropped,
    })
}

pub fn quadratic_growth_probe(
    spec: &ProblemSpec,
    point: &KktPoint,
    n_trials: usize,
    radius: f64,
    seed: u64,
) -> Result<GrowthProbe> {
    let solver = ParabolicSolver::new(spec, point.y.grid(), SolverOptions::default())?;
    quadratic_growth_probe_with(&solver, point, n_trials, radius, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::{solve_ocp, OptimizerOptions};
    use crate::problem::builtin_problem;

    fn converged(name: &str, nodes: usize, levels: usize) -> (ProblemSpec, KktPoint) {
        let spec = builtin_problem(name).unwrap();
        let grid = Grid::for_problem(&spec, &[nodes], levels).unwrap();
        let sol = solve_ocp(&spec, &grid, &OptimizerOptions::default()).unwrap();
        assert!(sol.trace.converged());
        (spec, sol.point)
    }

    #[test]
    fn zero_direction_has_zero_form() {
        let (spec, point) = converged("tracking_box_1d", 9, 9);
        let z = SpaceTimeField::zeros(point.y.grid());
        let solver = ParabolicSolver::new(&spec, point.y.grid(), Default::default()).unwrap();
        let dir = measure_direction(&solver, &point, z.clone(), z).unwrap();
        assert_eq!(quadratic_form(&spec, &point, &dir).unwrap(), 0.0);
        assert_eq!(dir.c2_residual, 0.0);
    }

    #[test]
    fn linear_quadratic_form_is_a_sum_of_norms() {
        let (spec, point) = converged("strictly_feasible_1d", 9, 9);
        let dir = sample_critical_direction(&spec, &point, 3).unwrap();
        let grid = point.y.grid();
        let want = grid.control_inner(&dir.y, &dir.y) + 0.1 * grid.control_inner(&dir.v, &dir.v);
        let q = quadratic_form(&spec, &point, &dir).unwrap();
        assert!((q - want).abs() <= 1e-14 * want, "{q} vs {want}");
        assert!(q > 0.0);
        // inactive everywhere, so nothing was projected away
        assert_eq!(point.e.max_abs(), 0.0);
        assert!(dir.c2_residual <= 1e-10);
    }

    #[test]
    fn control_constraint_projection_zeroes_the_active_set() {
        let (spec, point) = converged("tracking_box_1d", 17, 17);
        let dir = sample_critical_direction(&spec, &point, 11).unwrap();
        let eps = active_threshold(&point.e);
        let mut seen = 0;
        for (ev, vv) in point.e.as_slice().iter().zip(dir.v.as_slice()) {
            if *ev > eps {
                assert_eq!(*vv, 0.0);
                seen += 1;
            }
        }
        assert!(seen > 0);
        assert_eq!(dir.c3_violation, 0.0);
        assert!(dir.c1_satisfied, "{}", dir.c1_value);
    }

    #[test]
    fn directions_are_seed_deterministic() {
        let (spec, point) = converged("example31_poly", 9, 9);
        let a = sample_critical_direction(&spec, &point, 5).unwrap();
        let b = sample_critical_direction(&spec, &point, 5).unwrap();
        assert_eq!(a.v, b.v);
        let c = sample_critical_direction(&spec, &point, 6).unwrap();
        assert_ne!(a.v, c.v);
    }

    #[test]
    fn legendre_bound_for_tracking_box() {
        let (spec, point) = converged("tracking_box_1d", 9, 9);
        let m = legendre_min(&spec, &point).unwrap();
        assert!((m.value - 0.1).abs() <= 1e-12);
        let mut zero_e = point.clone();
        zero_e.e = SpaceTimeField::zeros(point.y.grid());
        assert!(legendre_min(&spec, &zero_e).unwrap().value >= spec.gamma1);
    }

    #[test]
    fn growth_probe_csv_and_radius_guard() {
        let (spec, point) = converged("strictly_feasible_1d", 9, 9);
        let probe = quadratic_growth_probe(&spec, &point, 4, 1e-2, 1).unwrap();
        assert_eq!(probe.trials.len(), 4);
        let csv = probe.to_csv();
        assert!(csv.starts_with("trial,ratio,norm_du,feasible\n0,"));
        assert!(quadratic_growth_probe(&spec, &point, 4, 0.0, 1).is_err());
        assert_eq!(
            probe,
            quadratic_growth_probe(&spec, &point, 4, 1e-2, 1).unwrap()
        );
    }
}
