//! Problem data for semilinear parabolic control with a mixed pointwise
//! constraint `g(x, t, y, u) <= 0`, plus sampled audits of the standing
//! hypotheses (ellipticity, monotone nonlinearity, `g_u >= gamma2`,
//! `L_uu >= gamma1`).

mod catalog;
mod file;

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::{Env, Expr};

pub use catalog::{builtin_problem, catalog_names, mms_exact_state, mms_forcing};
pub use file::{parse_problem, read_problem, write_problem, write_problem_string};

type NativeFn = Arc<dyn Fn(&Env) -> f64 + Send + Sync>;

/// A scalar function of `(x, t, y, u)`, either a parsed closed form or a
/// native closure.
#[derive(Clone)]
pub enum Map {
    Expr(Arc<Expr>),
    Native(NativeFn),
}

impl Map {
    pub fn parse(src: &str) -> Result<Map> {
        Ok(Map::Expr(Arc::new(Expr::parse(src)?)))
    }

    pub fn native(f: impl Fn(&Env) -> f64 + Send + Sync + 'static) -> Map {
        Map::Native(Arc::new(f))
    }

    pub fn constant(c: f64) -> Map {
        Map::Expr(Arc::new(Expr::Num(c)))
    }

    #[inline]
    pub fn eval(&self, env: &Env) -> f64 {
        match self {
            Map::Expr(e) => e.eval(env),
            Map::Native(f) => f(env),
        }
    }

    #[inline]
    pub fn at(&self, x: &[f64], t: f64, y: f64, u: f64) -> f64 {
        self.eval(&Env::new(x, t, y, u))
    }

    pub fn source(&self) -> Option<&Expr> {
        match self {
            Map::Expr(e) => Some(e),
            Map::Native(_) => None,
        }
    }
}

impl fmt::Debug for Map {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Map::Expr(e) => write!(f, "Map({e})"),
            Map::Native(_) => f.write_str("Map(<native>)"),
        }
    }
}

/// A function of `(x, t, y, u)` with its first and second partials in
/// `(y, u)`. `dyu` serves for both mixed entries.
#[derive(Clone, Debug)]
pub struct ScalarMap2 {
    pub value: Map,
    pub dy: Map,
    pub du: Map,
    pub dyy: Map,
    pub dyu: Map,
    pub duu: Map,
}

/// Point evaluation of a [`ScalarMap2`] and all its partials.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub dy: f64,
    pub du: f64,
    pub dyy: f64,
    pub dyu: f64,
    pub duu: f64,
}

impl ScalarMap2 {
    /// Builds from closed forms in the order value, dy, du, dyy, dyu, duu.
    pub fn parse(srcs: [&str; 6]) -> Result<ScalarMap2> {
        Ok(ScalarMap2 {
            value: Map::parse(srcs[0])?,
            dy: Map::parse(srcs[1])?,
            du: Map::parse(srcs[2])?,
            dyy: Map::parse(srcs[3])?,
            dyu: Map::parse(srcs[4])?,
            duu: Map::parse(srcs[5])?,
        })
    }

    pub fn maps(&self) -> [(&'static str, &Map); 6] {
        [
            ("value", &self.value),
            ("dy", &self.dy),
            ("du", &self.du),
            ("dyy", &self.dyy),
            ("dyu", &self.dyu),
            ("duu", &self.duu),
        ]
    }

    pub fn jet(&self, x: &[f64], t: f64, y: f64, u: f64) -> Jet2 {
        let env = Env::new(x, t, y, u);
        Jet2 {
            value: self.value.eval(&env),
            dy: self.dy.eval(&env),
            du: self.du.eval(&env),
            dyy: self.dyy.eval(&env),
            dyu: self.dyu.eval(&env),
            duu: self.duu.eval(&env),
        }
    }
}

/// Monotone nonlinearity `f` of the state equation with `f(0) = 0` and
/// `f' >= lower_slope`.
#[derive(Clone, Debug)]
pub struct Nonlinearity {
    pub f: Map,
    pub df: Map,
    pub ddf: Map,
    pub lower_slope: f64,
}

impl Nonlinearity {
    pub fn parse(f: &str, df: &str, ddf: &str, lower_slope: f64) -> Result<Nonlinearity> {
        Ok(Nonlinearity {
            f: Map::parse(f)?,
            df: Map::parse(df)?,
            ddf: Map::parse(ddf)?,
            lower_slope,
        })
    }

    #[inline]
    pub fn value(&self, y: f64) -> f64 {
        self.f.eval(&Env {
            y,
            ..Env::default()
        })
    }

    #[inline]
    pub fn slope(&self, y: f64) -> f64 {
        self.df.eval(&Env {
            y,
            ..Env::default()
        })
    }

    #[inline]
    pub fn curvature(&self, y: f64) -> f64 {
        self.ddf.eval(&Env {
            y,
            ..Env::default()
        })
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Range {
        Range { lo, hi }
    }

    fn lerp(&self, s: f64) -> f64 {
        self.lo + s * (self.hi - self.lo)
    }
}

/// The `(y, u)` box over which hypotheses are audited.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleBox {
    pub y: Range,
    pub u: Range,
}

/// Complete continuous problem: domain `(0, l_1) x ... x (0, l_dim)`,
/// horizon, operator coefficients `a_ij(x)`, nonlinearity, integrand `L`,
/// constraint `g`, initial state, and the declared hypothesis constants.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub name: String,
    pub dim: usize,
    pub extents: Vec<f64>,
    pub horizon: f64,
    /// Row-major `dim x dim`, functions of `x1, x2` only.
    pub coefficients: Vec<Vec<Map>>,
    pub f: Nonlinearity,
    pub lagrangian: ScalarMap2,
    pub constraint: ScalarMap2,
    pub y0: Map,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Documented audit box for this problem.
    pub sample_box: SampleBox,
}

impl ProblemSpec {
    /// Checks the structural invariants (dimensions and positive constants).
    pub fn check_shape(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::InvalidArgument(format!(
                "dim must be 1 or 2, got {}",
                self.dim
            )));
        }
        if self.extents.len() != self.dim || self.extents.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "need {} positive extents, got {:?}",
                self.dim, self.extents
            )));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.coefficients.len() != self.dim
            || self.coefficients.iter().any(|r| r.len() != self.dim)
        {
            return Err(Error::InvalidArgument(
                "coefficient matrix must be dim x dim".into(),
            ));
        }
        if !(self.gamma1 > 0.0 && self.gamma2 > 0.0) {
            return Err(Error::InvalidArgument(
                "gamma1 and gamma2 must be positive".into(),
            ));
        }
        for r in [self.sample_box.y, self.sample_box.u] {
            if !(r.lo <= r.hi) {
                return Err(Error::InvalidArgument(format!("empty sample range {r:?}")));
            }
        }
        Ok(())
    }

    pub fn identity_coefficients(dim: usize) -> Vec<Vec<Map>> {
        (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| Map::constant(if i == j { 1.0 } else { 0.0 }))
                    .collect()
            })
            .collect()
    }

    pub fn coefficient(&self, i: usize, j: usize, x: &[f64]) -> f64 {
        self.coefficients[i][j].at(x, 0.0, 0.0, 0.0)
    }

    pub fn initial_state(&self, x: &[f64]) -> f64 {
        self.y0.at(x, 0.0, 0.0, 0.0)
    }
}

/// Location of a sampled minimum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SamplePoint {
    pub x: [f64; 2],
    pub t: f64,
    pub y: f64,
    pub u: f64,
}

impl fmt::Display for SamplePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(x1={:.6}, x2={:.6}, t={:.6}, y={:.6}, u={:.6})",
            self.x[0], self.x[1], self.t, self.y, self.u
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisReport {
    /// Smallest sampled eigenvalue of the symmetric part of `a(x)`.
    pub alpha_hat: f64,
    pub max_asymmetry: f64,
    pub f_at_zero: f64,
    pub cf_hat: f64,
    pub min_gu: f64,
    pub min_gu_at: SamplePoint,
    pub min_luu: f64,
    pub min_luu_at: SamplePoint,
    pub h1: bool,
    pub h2: bool,
    /// `1/g_u` bounded on the samples (`min g_u > 0`).
    pub h4: bool,
    pub h4_prime: bool,
    pub sample_count: usize,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.h1 && self.h2 && self.h4 && self.h4_prime
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("alpha_hat", format!("{:.17e}", self.alpha_hat));
        kv("max_asymmetry", format!("{:.17e}", self.max_asymmetry));
        kv("f_at_zero", format!("{:.17e}", self.f_at_zero));
        kv("cf_hat", format!("{:.17e}", self.cf_hat));
        kv("min_gu", format!("{:.17e}", self.min_gu));
        kv("min_gu_at", self.min_gu_at.to_string());
        kv("min_luu", format!("{:.17e}", self.min_luu));
        kv("min_luu_at", self.min_luu_at.to_string());
        kv("pass_h1", self.h1.to_string());
        kv("pass_h2", self.h2.to_string());
        kv("pass_h4", self.h4.to_string());
        kv("pass_h4_prime", self.h4_prime.to_string());
        kv("sample_count", self.sample_count.to_string());
        s
    }
}

/// Van der Corput radical inverse in the given prime base.
fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

const HALTON_BASES: [u64; 5] = [2, 3, 5, 7, 11];

/// Randomly shifted Halton points in `[0, 1)^dims`; the shift is the only
/// use of the seed, so the set stays low-discrepancy.
pub(crate) fn halton_points(n: usize, dims: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dims).map(|_| rng.gen::<f64>()).collect();
    (1..=n as u64)
        .map(|i| {
            (0..dims)
                .map(|d| (radical_inverse(i, HALTON_BASES[d]) + shift[d]).fract())
                .collect()
        })
        .collect()
}

fn check_finite(v: f64, map: &str, p: &SamplePoint) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteMap {
            map: map.to_string(),
            point: p.to_string(),
        })
    }
}

/// Samples the hypotheses on a shifted Halton set over
/// `closure(Omega) x [0, T] x sample_box`.
///
/// The `(x, t)` coordinates include the closed domain so coefficient and
/// constraint data are exercised on the boundary as well.
pub fn validate_hypotheses(
    spec: &ProblemSpec,
    sample_box: &SampleBox,
    n_samples: usize,
    seed: u64,
) -> Result<HypothesisReport> {
    spec.check_shape()?;
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
    }
    for r in [sample_box.y, sample_box.u] {
        if !(r.lo <= r.hi) {
            return Err(Error::InvalidArgument(format!("empty sample range {r:?}")));
        }
    }
    let dims = spec.dim + 3;
    let pts = halton_points(n_samples, dims, seed);

    let mut alpha_hat = f64::INFINITY;
    let mut max_asym: f64 = 0.0;
    let mut cf_hat = f64::INFINITY;
    let mut min_gu = f64::INFINITY;
    let mut min_luu = f64::INFINITY;
    let mut min_gu_at = SamplePoint::default();
    let mut min_luu_at = SamplePoint::default();

    let zero = SamplePoint::default();
    let f_at_zero = check_finite(spec.f.value(0.0), "f", &zero)?;

    for p in &pts {
        let mut x = [0.0; 2];
        for k in 0..spec.dim {
            x[k] = p[k] * spec.extents[k];
        }
        let t = p[spec.dim] * spec.horizon;
        let y = sample_box.y.lerp(p[spec.dim + 1]);
        let u = sample_box.u.lerp(p[spec.dim + 2]);
        let sp = SamplePoint { x, t, y, u };
        let xs = &x[..spec.dim];

        // ellipticity: symmetric part of a(x)
        let mut a = [[0.0; 2]; 2];
        for i in 0..spec.dim {
            for j in 0..spec.dim {
                a[i][j] = check_finite(
                    spec.coefficient(i, j, xs),
                    &format!("a{}{}", i + 1, j + 1),
                    &sp,
                )?;
            }
        }
        let lam = if spec.dim == 1 {
            a[0][0]
        } else {
            let off = 0.5 * (a[0][1] + a[1][0]);
            max_asym = max_asym.max((a[0][1] - a[1][0]).abs());
            let mean = 0.5 * (a[0][0] + a[1][1]);
            let rad = (0.25 * (a[0][0] - a[1][1]).powi(2) + off * off).sqrt();
            mean - rad
        };
        alpha_hat = alpha_hat.min(lam);

        check_finite(spec.initial_state(xs), "y0", &sp)?;
        check_finite(spec.f.value(y), "f", &sp)?;
        let df = check_finite(spec.f.slope(y), "f'", &sp)?;
        check_finite(spec.f.curvature(y), "f''", &sp)?;
        cf_hat = cf_hat.min(df);

        for (prefix, m) in [("L", &spec.lagrangian), ("g", &spec.constraint)] {
            for (name, map) in m.maps() {
                check_finite(map.at(xs, t, y, u), &format!("{prefix}.{name}"), &sp)?;
            }
        }
        let gu = spec.constraint.du.at(xs, t, y, u);
        if gu < min_gu {
            min_gu = gu;
            min_gu_at = sp;
        }
        let luu = spec.lagrangian.duu.at(xs, t, y, u);
        if luu < min_luu {
            min_luu = luu;
            min_luu_at = sp;
        }
    }

    let scale = 1.0 + alpha_hat.abs();
    let h1 = alpha_hat > 0.0 && max_asym <= 1e-12 * scale;
    let h2 = f_at_zero == 0.0 && cf_hat >= spec.f.lower_slope;
    let h4 = min_gu > 0.0;
    let h4_prime = min_gu >= spec.gamma2 && min_luu >= spec.gamma1;
    Ok(HypothesisReport {
        alpha_hat,
        max_asymmetry: max_asym,
        f_at_zero,
        cf_hat,
        min_gu,
        min_gu_at,
        min_luu,
        min_luu_at,
        h1,
        h2,
        h4,
        h4_prime,
        sample_count: n_samples,
    })
}

/// Worst relative disagreement between a supplied partial and its central
/// finite difference.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialsCheck {
    pub worst_relative_error: f64,
    pub worst_map: String,
    pub worst_at: SamplePoint,
    pub points: usize,
}

/// Cross-checks every supplied partial derivative against central
/// differences of its parent (step `1e-4 * max(1, |v|)`), at `n_points`
/// random points of the audit region. Relative error is measured as
/// `|fd - exact| / max(1, |exact|)`.
pub fn check_partials(spec: &ProblemSpec, n_points: usize, seed: u64) -> PartialsCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (0.0, String::new(), SamplePoint::default());
    let mut record = |err: f64, name: &str, p: SamplePoint| {
        if err > worst.0 || worst.1.is_empty() {
            worst = (err, name.to_string(), p);
        }
    };
    let rel = |fd: f64, exact: f64| (fd - exact).abs() / exact.abs().max(1.0);
    for _ in 0..n_points {
        let mut x = [0.0; 2];
        for (k, xk) in x.iter_mut().enumerate().take(spec.dim) {
            *xk = rng.gen::<f64>() * spec.extents[k];
        }
        let t = rng.gen::<f64>() * spec.horizon;
        let y = spec.sample_box.y.lerp(rng.gen());
        let u = spec.sample_box.u.lerp(rng.gen());
        let p = SamplePoint { x, t, y, u };
        let xs = &x[..spec.dim];
        let hy = 1e-4 * y.abs().max(1.0);
        let hu = 1e-4 * u.abs().max(1.0);
        let cd_y = |m: &Map| (m.at(xs, t, y + hy, u) - m.at(xs, t, y - hy, u)) / (2.0 * hy);
        let cd_u = |m: &Map| (m.at(xs, t, y, u + hu) - m.at(xs, t, y, u - hu)) / (2.0 * hu);
        for (prefix, m) in [("L", &spec.lagrangian), ("g", &spec.constraint)] {
            let j = m.jet(xs, t, y, u);
            record(rel(cd_y(&m.value), j.dy), &format!("{prefix}.dy"), p);
            record(rel(cd_u(&m.value), j.du), &format!("{prefix}.du"), p);
            record(rel(cd_y(&m.dy), j.dyy), &format!("{prefix}.dyy"), p);
            record(rel(cd_u(&m.dy), j.dyu), &format!("{prefix}.dyu"), p);
            record(rel(cd_y(&m.du), j.dyu), &format!("{prefix}.dyu"), p);
            record(rel(cd_u(&m.du), j.duu), &format!("{prefix}.duu"), p);
        }
        let nl = &spec.f;
        let fd_f = (nl.value(y + hy) - nl.value(y - hy)) / (2.0 * hy);
        record(rel(fd_f, nl.slope(y)), "f'", p);
        let fd_df = (nl.slope(y + hy) - nl.slope(y - hy)) / (2.0 * hy);
        record(rel(fd_df, nl.curvature(y)), "f''", p);
    }
    PartialsCheck {
        worst_relative_error: worst.0,
        worst_map: worst.1,
        worst_at: worst.2,
        points: n_points,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec(g: [&str; 6], gamma2: f64) -> ProblemSpec {
        ProblemSpec {
            name: "test".into(),
            dim: 1,
            extents: vec![1.0],
            horizon: 2.0,
            coefficients: ProblemSpec::identity_coefficients(1),
            f: Nonlinearity::parse("0", "0", "0", 0.0).unwrap(),
            lagrangian: ScalarMap2::parse(["0.5*y^2 + 0.5*u^2", "y", "u", "1", "0", "1"]).unwrap(),
            constraint: ScalarMap2::parse(g).unwrap(),
            y0: Map::constant(0.0),
            gamma1: 1.0,
            gamma2,
            sample_box: SampleBox {
                y: Range::new(-2.0, 2.0),
                u: Range::new(-2.0, 2.0),
            },
        }
    }

    #[test]
    fn identity_constraint_audit() {
        let spec = base_spec(["u", "0", "1", "0", "0", "0"], 1.0);
        let r = validate_hypotheses(&spec, &spec.sample_box, 200, 7).unwrap();
        assert_eq!(r.min_gu, 1.0);
        assert!(r.h4_prime && r.h4 && r.h1);
    }

    #[test]
    fn zero_nonlinearity_passes_h2() {
        let spec = base_spec(["u", "0", "1", "0", "0", "0"], 1.0);
        let r = validate_hypotheses(&spec, &spec.sample_box, 50, 1).unwrap();
        assert!(r.h2);
        assert_eq!(r.cf_hat, 0.0);
        assert_eq!(r.f_at_zero, 0.0);
    }

    #[test]
    fn cubic_example_constraint_has_unit_lower_slope() {
        // g_u = (y u - 1)^2 + 1 + |t - 1| >= 1, attained at y u = 1, t = 1.
        let spec = base_spec(
            [
                "(1/3)*y^2*u^3 - y*u^2 + (2 + abs(t - 1))*u",
                "(2/3)*y*u^3 - u^2",
                "(y*u - 1)^2 + 1 + abs(t - 1)",
                "(2/3)*u^3",
                "2*y*u^2 - 2*u",
                "2*y^2*u - 2*y",
            ],
            1.0,
        );
        let r = validate_hypotheses(&spec, &spec.sample_box, 4000, 3).unwrap();
        assert!(r.min_gu >= 1.0);
        assert!(r.min_gu < 1.05, "sampled min {} far from 1", r.min_gu);
        assert!(r.h4_prime);
        let pc = check_partials(&spec, 100, 11);
        assert!(pc.worst_relative_error <= 1e-5, "{pc:?}");
        // brute-force over a fine (y, u, t) lattice confirms the bound
        let mut lattice_min = f64::INFINITY;
        for i in 0..=80 {
            for j in 0..=80 {
                for k in 0..=8 {
                    let y = -2.0 + 4.0 * i as f64 / 80.0;
                    let u = -2.0 + 4.0 * j as f64 / 80.0;
                    let t = 2.0 * k as f64 / 8.0;
                    lattice_min = lattice_min.min(spec.constraint.du.at(&[0.5], t, y, u));
                }
            }
        }
        assert!((lattice_min - 1.0).abs() < 1e-12);
    }

    #[test]
    fn failing_gamma_is_reported() {
        let spec = base_spec(["u", "0", "1", "0", "0", "0"], 1.5);
        let r = validate_hypotheses(&spec, &spec.sample_box, 20, 0).unwrap();
        assert!(r.h4 && !r.h4_prime);
    }

    #[test]
    fn non_finite_map_is_named() {
        let spec = base_spec(["u", "0", "1", "0", "0", "1/(u - u)"], 1.0);
        match validate_hypotheses(&spec, &spec.sample_box, 5, 0) {
            Err(Error::NonFiniteMap { map, .. }) => assert_eq!(map, "g.duu"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn audit_is_deterministic_for_seed() {
        let spec = base_spec(
            [
                "u + y^2*u^3/3",
                "2*y*u^3/3",
                "1 + y^2*u^2",
                "2*u^3/3",
                "2*y*u^2",
                "2*y^2*u",
            ],
            1.0,
        );
        let a = validate_hypotheses(&spec, &spec.sample_box, 100, 42).unwrap();
        let b = validate_hypotheses(&spec, &spec.sample_box, 100, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wrong_partial_is_caught() {
        let spec = base_spec(["u + y*u", "u", "1 + y", "0", "5", "0"], 1.0);
        let pc = check_partials(&spec, 10, 0);
        assert!(pc.worst_relative_error > 0.5);
        assert_eq!(pc.worst_map, "g.dyu");
    }

    #[test]
    fn asymmetric_or_degenerate_coefficients_fail_h1() {
        let mut spec = base_spec(["u", "0", "1", "0", "0", "0"], 1.0);
        spec.dim = 2;
        spec.extents = vec![1.0, 1.0];
        spec.coefficients = vec![
            vec![Map::constant(1.0), Map::parse("0.5*x1").unwrap()],
            vec![Map::constant(0.0), Map::constant(1.0)],
        ];
        let r = validate_hypotheses(&spec, &spec.sample_box, 50, 0).unwrap();
        assert!(!r.h1 && r.max_asymmetry > 0.0);
        spec.coefficients = ProblemSpec::identity_coefficients(2);
        spec.coefficients[1][1] = Map::parse("x1 - 0.5").unwrap();
        let r = validate_hypotheses(&spec, &spec.sample_box, 50, 0).unwrap();
        assert!(!r.h1 && r.alpha_hat < 0.0);
    }
}
