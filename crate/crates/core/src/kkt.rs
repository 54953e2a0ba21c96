//! Pointwise optimality conditions: the constraint boundary `Phi`, the
//! pointwise control update, multiplier recovery and KKT residuals.
//!
//! Fields are evaluated on every time level, level 0 included. The scheme
//! never reads `u_0`, and level 0 of the adjoint continues the backward
//! recursion, so the level-0 values close the same pointwise system.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::field_io::fmt17;
use crate::grid::SpaceTimeField;
use crate::problem::ProblemSpec;
use crate::solvers::{ParabolicSolver, SolverOptions};

/// Feasibility tolerance on `max g`.
pub const TOL_FEAS: f64 = 1e-8;
/// Tolerance on negative multiplier values.
pub const TOL_SIGN: f64 = 1e-10;

/// Nodes with `e` above this are strongly active.
pub fn active_threshold(e: &SpaceTimeField) -> f64 {
    1e-6 * (1.0 + e.max_abs())
}

/// Root of an increasing scalar function.
///
/// `h` returns the value and derivative. The bracket around `start` is
/// grown by doubling (at most 60 times), then refined by Newton steps that
/// fall back to bisection whenever they leave the bracket. Returns `None`
/// when no sign change is found or a value is NaN.
pub(crate) fn increasing_root(
    h: impl Fn(f64) -> (f64, f64),
    start: f64,
    tol: impl Fn(f64, f64) -> f64,
) -> Option<f64> {
    let (h0, _) = h(start);
    if h0.is_nan() {
        return None;
    }
    if h0 == 0.0 {
        return Some(start);
    }
    let dir = if h0 > 0.0 { -1.0 } else { 1.0 };
    let mut step = 1.0f64.max(start.abs() * 1e-3);
    let mut far = start + dir * step;
    let mut doublings = 0;
    loop {
        let (v, _) = h(far);
        if v.is_nan() {
            return None;
        }
        if v == 0.0 {
            return Some(far);
        }
        if (v > 0.0) != (h0 > 0.0) {
            break;
        }
        doublings += 1;
        if doublings > 60 {
            return None;
        }
        step *= 2.0;
        far = start + dir * step;
    }
    let (mut lo, mut hi) = if dir < 0.0 {
        (far, start)
    } else {
        (start, far)
    };
    let mut u = start;
    let mut best = (f64::INFINITY, start);
    for _ in 0..200 {
        let (v, d) = h(u);
        if v.is_nan() {
            return None;
        }
        if v.abs() < best.0 {
            best = (v.abs(), u);
        }
        if v.abs() <= tol(u, d) {
            return Some(u);
        }
        if v > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            return Some(best.1);
        }
        let newton = u - v / d;
        u = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Some(best.1)
}

/// The unique `u` with `g(x, t, y, u) = 0`.
pub fn constraint_boundary(spec: &ProblemSpec, x: &[f64], t: f64, y: f64) -> Result<f64> {
    let g = &spec.constraint;
    increasing_root(
        |u| (g.value.at(x, t, y, u), g.du.at(x, t, y, u)),
        0.0,
        |u, d| 1e-12 * (1.0 + u.abs() * d.abs()),
    )
    .ok_or_else(|| Error::NoRoot {
        x: x.to_vec(),
        t,
        y,
    })
}

/// Minimizes `L(x,t,y,u) - phi u` subject to `g(x,t,y,u) <= 0`.
///
/// Returns the control and the multiplier of the pointwise problem. Since
/// `g` is increasing in `u`, the feasible set is `u <= Phi`; the multiplier
/// is nonzero only when the unconstrained minimizer lies beyond `Phi`.
pub fn pointwise_control_update(
    spec: &ProblemSpec,
    x: &[f64],
    t: f64,
    y: f64,
    phi: f64,
) -> Result<(f64, f64)> {
    let bound = constraint_boundary(spec, x, t, y)?;
    pointwise_with_bound(spec, x, t, y, phi, bound)
}

pub(crate) fn pointwise_with_bound(
    spec: &ProblemSpec,
    x: &[f64],
    t: f64,
    y: f64,
    phi: f64,
    bound: f64,
) -> Result<(f64, f64)> {
    let l = &spec.lagrangian;
    let slope_at_bound = l.du.at(x, t, y, bound) - phi;
    if slope_at_bound < 0.0 {
        let gu = spec.constraint.du.at(x, t, y, bound);
        if !(gu > 0.0) {
            return Err(Error::PointwiseFailure {
                x: x.to_vec(),
                t,
                y,
                phi,
            });
        }
        return Ok((bound, -slope_at_bound / gu));
    }
    if slope_at_bound == 0.0 {
        return Ok((bound, 0.0));
    }
    let u = increasing_root(
        |u| (l.du.at(x, t, y, u) - phi, l.duu.at(x, t, y, u)),
        bound - 1.0,
        |u, d| 1e-13 * (1.0 + phi.abs() + u.abs() * d.abs()),
    )
    .ok_or_else(|| Error::PointwiseFailure {
        x: x.to_vec(),
        t,
        y,
        phi,
    })?;
    // the root lies left of the bound, up to the root-finder tolerance
    Ok((u.min(bound), 0.0))
}

fn node_x(spec: &ProblemSpec, field: &SpaceTimeField, k: usize) -> [f64; 2] {
    let c = field.grid().space.interior_coords(k);
    if spec.dim == 1 {
        [c[0], 0.0]
    } else {
        c
    }
}

/// Applies `f(x, t, level, node)` at every node.
fn map_nodes(
    spec: &ProblemSpec,
    like: &SpaceTimeField,
    mut f: impl FnMut(&[f64], f64, usize, usize) -> Result<f64>,
) -> Result<SpaceTimeField> {
    let grid = like.grid();
    let mut out = SpaceTimeField::zeros(grid);
    for k in 0..grid.n_interior() {
        let xc = node_x(spec, like, k);
        let x = &xc[..spec.dim];
        for j in 0..grid.levels() {
            out[(j, k)] = f(x, grid.time.time(j), j, k)?;
        }
    }
    Ok(out)
}

/// Pointwise control update at every node. Returns `(u, e)`.
pub fn pointwise_update_field(
    spec: &ProblemSpec,
    y: &SpaceTimeField,
    phi: &SpaceTimeField,
) -> Result<(SpaceTimeField, SpaceTimeField)> {
    y.check_aligned(phi, "adjoint")?;
    let mut e = SpaceTimeField::zeros(y.grid());
    let u = map_nodes(spec, y, |x, t, j, k| {
        let (u, ek) = pointwise_control_update(spec, x, t, y[(j, k)], phi[(j, k)])?;
        e[(j, k)] = ek;
        Ok(u)
    })?;
    Ok((u, e))
}

/// `Phi(x, t, y(x, t))` at every node.
pub fn boundary_field(spec: &ProblemSpec, y: &SpaceTimeField) -> Result<SpaceTimeField> {
    map_nodes(spec, y, |x, t, j, k| {
        constraint_boundary(spec, x, t, y[(j, k)])
    })
}

/// `g(x, t, y, u)` at every node.
pub fn constraint_field(
    spec: &ProblemSpec,
    y: &SpaceTimeField,
    u: &SpaceTimeField,
) -> Result<SpaceTimeField> {
    y.check_aligned(u, "control")?;
    map_nodes(spec, y, |x, t, j, k| {
        Ok(spec.constraint.value.at(x, t, y[(j, k)], u[(j, k)]))
    })
}

/// `e = (phi - L_u) / g_u`, without clipping.
pub fn recover_multiplier_division(
    spec: &ProblemSpec,
    y: &SpaceTimeField,
    u: &SpaceTimeField,
    phi: &SpaceTimeField,
) -> Result<SpaceTimeField> {
    y.check_aligned(u, "control")?;
    y.check_aligned(phi, "adjoint")?;
    map_nodes(spec, y, |x, t, j, k| {
        let (yv, uv) = (y[(j, k)], u[(j, k)]);
        let gu = spec.constraint.du.at(x, t, yv, uv);
        if !(gu >= 0.5 * spec.gamma2) {
            return Err(Error::Hypothesis(format!(
                "g_u = {gu} < gamma2/2 at x = {x:?}, t = {t}, y = {yv}, u = {uv}"
            )));
        }
        Ok((phi[(j, k)] - spec.lagrangian.du.at(x, t, yv, uv)) / gu)
    })
}

/// `e = max{0, phi - L_u(y, Phi(y))} / g_u(y, Phi(y))`.
pub fn recover_multiplier_max(
    spec: &ProblemSpec,
    y: &SpaceTimeField,
    phi: &SpaceTimeField,
) -> Result<SpaceTimeField> {
    y.check_aligned(phi, "adjoint")?;
    map_nodes(spec, y, |x, t, j, k| {
        let yv = y[(j, k)];
        let b = constraint_boundary(spec, x, t, yv)?;
        let gu = spec.constraint.du.at(x, t, yv, b);
        if !(gu > 0.0) {
            return Err(Error::Hypothesis(format!(
                "g_u = {gu} at the constraint boundary, x = {x:?}, t = {t}, y = {yv}"
            )));
        }
        Ok((phi[(j, k)] - spec.lagrangian.du.at(x, t, yv, b)).max(0.0) / gu)
    })
}

/// Potential `f'(y) + g_y / g_u` of the linearized constraint system and
/// its max norm.
pub fn h_potential_audit(
    spec: &ProblemSpec,
    y: &SpaceTimeField,
    u: &SpaceTimeField,
) -> Result<(SpaceTimeField, f64)> {
    y.check_aligned(u, "control")?;
    let h = map_nodes(spec, y, |x, t, j, k| {
        let (yv, uv) = (y[(j, k)], u[(j, k)]);
        let gu = spec.constraint.du.at(x, t, yv, uv);
        if !(gu >= 0.5 * spec.gamma2) {
            return Err(Error::Hypothesis(format!(
                "g_u = {gu} < gamma2/2 at x = {x:?}, t = {t}, y = {yv}, u = {uv}"
            )));
        }
        let v = spec.f.slope(yv) + spec.constraint.dy.at(x, t, yv, uv) / gu;
        if !v.is_finite() {
            return Err(Error::Hypothesis(format!(
                "h-potential not finite at x = {x:?}, t = {t}"
            )));
        }
        Ok(v)
    })?;
    let bound = h.max_abs();
    Ok((h, bound))
}

/// Discrete objective: `L` summed over levels `1..nt` with slab weights.
pub fn objective(spec: &ProblemSpec, y: &SpaceTimeField, u: &SpaceTimeField) -> f64 {
    let grid = y.grid();
    let mut s = 0.0;
    for j in 1..grid.levels() {
        let t = grid.time.time(j);
        for k in 0..grid.n_interior() {
            let xc = node_x(spec, y, k);
            s += spec
                .lagrangian
                .value
                .at(&xc[..spec.dim], t, y[(j, k)], u[(j, k)]);
        }
    }
    s * grid.slab_weight()
}

#[derive(Clone, Debug)]
pub struct KktPoint {
    pub y: SpaceTimeField,
    pub u: SpaceTimeField,
    pub phi: SpaceTimeField,
    pub e: SpaceTimeField,
    pub objective: f64,
}

impl KktPoint {
    pub fn check_aligned(&self) -> Result<()> {
        self.y.check_aligned(&self.u, "control")?;
        self.y.check_aligned(&self.phi, "adjoint")?;
        self.y.check_aligned(&self.e, "multiplier")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ResidualReport {
    pub stat_res: f64,
    pub comp_res: f64,
    pub sign_viol: f64,
    pub feas_viol: f64,
    pub adjoint_res: f64,
    pub state_res: f64,
}

impl ResidualReport {
    pub const KEYS: [&'static str; 6] = [
        "stat_res",
        "comp_res",
        "sign_viol",
        "feas_viol",
        "adjoint_res",
        "state_res",
    ];

    pub fn values(&self) -> [f64; 6] {
        [
            self.stat_res,
            self.comp_res,
            self.sign_viol,
            self.feas_viol,
            self.adjoint_res,
            self.state_res,
        ]
    }

    /// Largest of the four optimality residuals the optimizer certifies.
    pub fn kkt_max(&self) -> f64 {
        self.stat_res
            .max(self.comp_res)
            .max(self.sign_viol)
            .max(self.feas_viol)
    }

    /// `key = value` lines with 17 significant digits.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for (k, v) in Self::KEYS.iter().zip(self.values()) {
            let _ = writeln!(s, "{k} = {}", fmt17(v));
        }
        s
    }

    pub fn from_kv(text: &str) -> Result<ResidualReport> {
        let mut vals = [f64::NAN; 6];
        for line in text.lines() {
            let Some((k, v)) = line.split_once('=') else {
                continue;
            };
            if let Some(i) = Self::KEYS.iter().position(|&key| key == k.trim()) {
                vals[i] = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad value in '{line}'")))?;
            }
        }
        if let Some(i) = vals.iter().position(|v| v.is_nan()) {
            return Err(Error::InvalidArgument(format!(
                "residual block lacks '{}'",
                Self::KEYS[i]
            )));
        }
        let [stat_res, comp_res, sign_viol, feas_viol, adjoint_res, state_res] = vals;
        Ok(ResidualReport {
            stat_res,
            comp_res,
            sign_viol,
            feas_viol,
            adjoint_res,
            state_res,
        })
    }
}

/// Evaluates all KKT residuals of `point` with the solver's operators.
pub fn kkt_residuals_with(
    solver: &ParabolicSolver<'_>,
    point: &KktPoint,
) -> Result<ResidualReport> {
    point.check_aligned()?;
    point.y.check_on(solver.grid(), "state")?;
    let spec = solver.spec();
    let grid = solver.grid().clone();
    let (y, u, phi, e) = (&point.y, &point.u, &point.phi, &point.e);
    let n = grid.n_interior();
    let nt = grid.levels();
    let tau = grid.time.step();
    let mut r = ResidualReport::default();
    for j in 0..nt {
        let t = grid.time.time(j);
        for k in 0..n {
            let x = solver.x(k);
            let (yv, uv, pv, ev) = (y[(j, k)], u[(j, k)], phi[(j, k)], e[(j, k)]);
            let lu = spec.lagrangian.du.at(x, t, yv, uv);
            let gu = spec.constraint.du.at(x, t, yv, uv);
            let g = spec.constraint.value.at(x, t, yv, uv);
            r.stat_res = r.stat_res.max((lu - pv + ev * gu).abs());
            r.comp_res = r.comp_res.max((ev * g).abs());
            if -ev > r.sign_viol {
                r.sign_viol = -ev;
            }
            r.feas_viol = r.feas_viol.max(g);
        }
    }
    // state: initial condition and implicit steps
    let y0 = solver.initial_state();
    let a = solver.operator();
    let mut ay = vec![0.0; n];
    for k in 0..n {
        r.state_res = r.state_res.max((y[(0, k)] - y0[k]).abs());
    }
    for j in 1..nt {
        a.matvec(y.level(j), &mut ay);
        for k in 0..n {
            let yv = y[(j, k)];
            let res = (yv - y[(j - 1, k)]) / tau + ay[k] + spec.f.value(yv) - u[(j, k)];
            r.state_res = r.state_res.max(res.abs());
        }
    }
    // adjoint: (phi_j - phi_{j+1})/tau + A^T phi_j + f'(y_j) phi_j + L_y + e g_y
    let at = a.transpose();
    let (c, rhs) = solver.adjoint_data(y, u, e);
    let mut ap = vec![0.0; n];
    for j in 0..nt {
        at.matvec(phi.level(j), &mut ap);
        for k in 0..n {
            let next = if j + 1 < nt { phi[(j + 1, k)] } else { 0.0 };
            let res = (phi[(j, k)] - next) / tau + ap[k] + c[(j, k)] * phi[(j, k)] - rhs[(j, k)];
            r.adjoint_res = r.adjoint_res.max(res.abs());
        }
    }
    for v in r.values() {
        if !v.is_finite() {
            return Err(Error::NonFiniteEntry {
                what: "KKT residual".into(),
                location: format!("{r:?}"),
            });
        }
    }
    Ok(r)
}

pub fn kkt_residuals(spec: &ProblemSpec, point: &KktPoint) -> Result<ResidualReport> {
    let solver = ParabolicSolver::new(spec, point.y.grid(), SolverOptions::default())?;
    kkt_residuals_with(&solver, point)
}
