//! Implicit Euler solvers for the state, linearized and adjoint equations.
//!
//! The state scheme is
//! `(y_j - y_{j-1})/tau + A y_j + f(y_j) = u_j` for `j = 1..nt-1`, with
//! `y_0` the interpolated initial state. The adjoint is the exact discrete
//! transpose of the linearized scheme:
//! `(phi_j - phi_{j+1})/tau + A^T phi_j + f'(y_j) phi_j = rhs_j`, run
//! backwards from a virtual `phi_{nt} = 0`. The same recursion is carried
//! down to level 0 so that adjoint fields are defined on every level.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid, SpaceTimeField};
use crate::linalg::{BandedLu, Ordering};
use crate::operator::{assemble_operator, CsrMatrix};
use crate::problem::ProblemSpec;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Per-step residual target in the max norm. On fine grids the target
    /// is raised to a few ulps of `max|y| (1/tau + |A|)`, below which the
    /// residual cannot be evaluated reliably.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Unused by the direct banded solver beyond validation; kept so that
    /// callers can state the accuracy they expect of a linear solve.
    pub linear_solver_tol: f64,
    pub ordering: Ordering,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            newton_tol: 1e-10,
            newton_max_iter: 30,
            linear_solver_tol: 1e-12,
            ordering: Ordering::Natural,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0 && self.linear_solver_tol > 0.0) || self.newton_max_iter == 0 {
            return Err(Error::InvalidArgument(format!(
                "solver tolerances must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StateSolveReport {
    pub max_newton_iters: usize,
    /// Final residual max norm of each implicit step, index `j - 1`.
    pub step_residuals: Vec<f64>,
    /// `max|y| / (max|u| + max|y0|)`, zero when both data vanish.
    pub bound_ratio: f64,
}

/// Operators and node coordinates shared by all solves on one grid.
pub struct ParabolicSolver<'a> {
    spec: &'a ProblemSpec,
    grid: Arc<Grid>,
    a: CsrMatrix,
    a_adj: CsrMatrix,
    coords: Vec<[f64; 2]>,
    opts: SolverOptions,
}

impl<'a> ParabolicSolver<'a> {
    pub fn new(spec: &'a ProblemSpec, grid: &Arc<Grid>, opts: SolverOptions) -> Result<Self> {
        opts.validate()?;
        if (spec.horizon - grid.time.horizon()).abs() > 1e-12 * spec.horizon {
            return Err(Error::DimensionMismatch(format!(
                "grid horizon {} differs from problem horizon {}",
                grid.time.horizon(),
                spec.horizon
            )));
        }
        let a = assemble_operator(spec, &grid.space, false)?.matrix;
        let a_adj = assemble_operator(spec, &grid.space, true)?.matrix;
        let coords = (0..grid.n_interior())
            .map(|k| grid.space.interior_coords(k))
            .collect();
        Ok(ParabolicSolver {
            spec,
            grid: grid.clone(),
            a,
            a_adj,
            coords,
            opts,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn spec(&self) -> &ProblemSpec {
        self.spec
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    pub fn operator(&self) -> &CsrMatrix {
        &self.a
    }

    /// Coordinates of interior node `k`, trimmed to the space dimension.
    pub fn x(&self, k: usize) -> &[f64] {
        &self.coords[k][..self.spec.dim]
    }

    pub fn initial_state(&self) -> Vec<f64> {
        (0..self.coords.len())
            .map(|k| self.spec.initial_state(self.x(k)))
            .collect()
    }

    fn factor(&self, adjoint: bool, diag: &[f64], step: usize) -> Result<BandedLu> {
        let m = if adjoint { &self.a_adj } else { &self.a };
        BandedLu::factor(m, 1.0 / self.grid.time.step(), diag, self.opts.ordering).map_err(|zp| {
            Error::SingularStep {
                step,
                pivot: zp.pivot,
            }
        })
    }

    pub fn solve_state(&self, u: &SpaceTimeField) -> Result<(SpaceTimeField, StateSolveReport)> {
        u.check_on(&self.grid, "control")?;
        u.check_finite("control")?;
        let grid = &self.grid;
        let n = grid.n_interior();
        let tau = grid.time.step();
        let f = &self.spec.f;
        let mut y = SpaceTimeField::zeros(grid);
        let y0 = self.initial_state();
        if let Some(k) = y0.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry {
                what: "initial state".into(),
                location: format!("node {k}"),
            });
        }
        y.level_mut(0).copy_from_slice(&y0);
        let op_scale = 1.0 / tau + self.a.max_row_sum();
        let mut report = StateSolveReport::default();
        let mut res = vec![0.0; n];
        let mut ay = vec![0.0; n];
        let mut jac = vec![0.0; n];
        for j in 1..grid.levels() {
            let (prev, cur) = {
                let data = y.as_mut_slice();
                let (a, b) = data.split_at_mut(j * n);
                (&a[(j - 1) * n..], &mut b[..n])
            };
            cur.copy_from_slice(prev);
            let uj = u.level(j);
            let mut history: Vec<f64> = Vec::new();
            let mut iters = 0;
            let mut last_update = f64::INFINITY;
            loop {
                self.a.matvec(cur, &mut ay);
                for k in 0..n {
                    res[k] = (cur[k] - prev[k]) / tau + ay[k] + f.value(cur[k]) - uj[k];
                }
                let r = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if !r.is_finite() {
                    return Err(Error::NonFiniteState { step: j });
                }
                let ymax = cur.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let floor = f64::EPSILON * 1.0f64.max(ymax * op_scale);
                history.push(r);
                // stagnation at the rounding floor also counts as converged
                let stalled = last_update <= 4.0 * f64::EPSILON * ymax && r <= 64.0 * floor;
                if r <= self.opts.newton_tol.max(8.0 * floor) || stalled {
                    report.step_residuals.push(r);
                    break;
                }
                let growing = history.len() > 5
                    && history[history.len() - 6..].windows(2).all(|w| w[1] > w[0]);
                if iters >= self.opts.newton_max_iter || growing {
                    return Err(Error::NewtonDivergence {
                        step: j,
                        residual: r,
                        iterations: iters,
                    });
                }
                for k in 0..n {
                    jac[k] = f.slope(cur[k]);
                }
                let lu = self.factor(false, &jac, j)?;
                for v in res.iter_mut() {
                    *v = -*v;
                }
                lu.solve(&mut res);
                last_update = 0.0;
                for k in 0..n {
                    cur[k] += res[k];
                    last_update = last_update.max(res[k].abs());
                }
                iters += 1;
            }
            report.max_newton_iters = report.max_newton_iters.max(iters);
            if cur.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { step: j });
            }
        }
        let umax = u.as_slice()[n..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let y0max = y0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let denom = umax + y0max;
        report.bound_ratio = if denom > 0.0 {
            y.max_abs() / denom
        } else {
            0.0
        };
        Ok((y, report))
    }

    /// Forward linear scheme `(z_j - z_{j-1})/tau + A z_j + c_j z_j = rhs_j`
    /// from `z_0 = z_init`, with `A` replaced by `A*` when `adjoint`.
    pub fn solve_linear(
        &self,
        c: &SpaceTimeField,
        rhs: &SpaceTimeField,
        z_init: &[f64],
        adjoint: bool,
    ) -> Result<SpaceTimeField> {
        c.check_on(&self.grid, "potential")?;
        rhs.check_on(&self.grid, "right-hand side")?;
        c.check_finite("potential")?;
        rhs.check_finite("right-hand side")?;
        let n = self.grid.n_interior();
        if z_init.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "initial values have {} entries, grid has {n} interior nodes",
                z_init.len()
            )));
        }
        let tau = self.grid.time.step();
        let mut z = SpaceTimeField::zeros(&self.grid);
        z.level_mut(0).copy_from_slice(z_init);
        let mut b = vec![0.0; n];
        for j in 1..self.grid.levels() {
            let lu = self.factor(adjoint, c.level(j), j)?;
            let prev = z.level(j - 1);
            for k in 0..n {
                b[k] = prev[k] / tau + rhs[(j, k)];
            }
            lu.solve(&mut b);
            z.level_mut(j).copy_from_slice(&b);
        }
        Ok(z)
    }

    /// Backward transposed scheme
    /// `(p_j - p_{j+1})/tau + A^T p_j + c_j p_j = rhs_j`, `j = nt-1..0`,
    /// with `p_{nt} = 0`.
    pub fn solve_backward(
        &self,
        c: &SpaceTimeField,
        rhs: &SpaceTimeField,
    ) -> Result<SpaceTimeField> {
        c.check_on(&self.grid, "potential")?;
        rhs.check_on(&self.grid, "right-hand side")?;
        c.check_finite("potential")?;
        rhs.check_finite("right-hand side")?;
        let n = self.grid.n_interior();
        let tau = self.grid.time.step();
        let mut p = SpaceTimeField::zeros(&self.grid);
        let mut b = vec![0.0; n];
        for j in (0..self.grid.levels()).rev() {
            let lu = self.factor(true, c.level(j), j)?;
            for k in 0..n {
                let next = if j + 1 < self.grid.levels() {
                    p[(j + 1, k)]
                } else {
                    0.0
                };
                b[k] = next / tau + rhs[(j, k)];
            }
            lu.solve(&mut b);
            p.level_mut(j).copy_from_slice(&b);
        }
        Ok(p)
    }

    /// Adjoint state for the pair `(y, u)` and multiplier `e`.
    pub fn solve_adjoint(
        &self,
        y: &SpaceTimeField,
        u: &SpaceTimeField,
        e: &SpaceTimeField,
    ) -> Result<SpaceTimeField> {
        y.check_on(&self.grid, "state")?;
        u.check_on(&self.grid, "control")?;
        e.check_on(&self.grid, "multiplier")?;
        let (c, rhs) = self.adjoint_data(y, u, e);
        self.solve_backward(&c, &rhs)
    }

    /// Potential `f'(y)` and right-hand side `-L_y - e g_y` of the adjoint.
    pub fn adjoint_data(
        &self,
        y: &SpaceTimeField,
        u: &SpaceTimeField,
        e: &SpaceTimeField,
    ) -> (SpaceTimeField, SpaceTimeField) {
        let n = self.grid.n_interior();
        let mut c = SpaceTimeField::zeros(&self.grid);
        let mut rhs = SpaceTimeField::zeros(&self.grid);
        for j in 0..self.grid.levels() {
            let t = self.grid.time.time(j);
            for k in 0..n {
                let (yv, uv) = (y[(j, k)], u[(j, k)]);
                let x = self.x(k);
                c[(j, k)] = self.spec.f.slope(yv);
                let mut r = -self.spec.lagrangian.dy.at(x, t, yv, uv);
                let ek = e[(j, k)];
                if ek != 0.0 {
                    r -= ek * self.spec.constraint.dy.at(x, t, yv, uv);
                }
                rhs[(j, k)] = r;
            }
        }
        (c, rhs)
    }
}

/// Solves the state equation on the grid carried by `u`.
pub fn solve_state(
    spec: &ProblemSpec,
    u: &SpaceTimeField,
    opts: &SolverOptions,
) -> Result<(SpaceTimeField, StateSolveReport)> {
    ParabolicSolver::new(spec, u.grid(), *opts)?.solve_state(u)
}

/// Solves `z_t + A z + c z = rhs` (or with `A*`) from `z_init`.
pub fn solve_linear_parabolic(
    spec: &ProblemSpec,
    c: &SpaceTimeField,
    rhs: &SpaceTimeField,
    z_init: &[f64],
    use_adjoint_operator: bool,
    opts: &SolverOptions,
) -> Result<SpaceTimeField> {
    ParabolicSolver::new(spec, rhs.grid(), *opts)?.solve_linear(
        c,
        rhs,
        z_init,
        use_adjoint_operator,
    )
}

/// Solves the adjoint equation for state `y`, control `u` and multiplier `e`.
pub fn solve_adjoint(
    spec: &ProblemSpec,
    y: &SpaceTimeField,
    u: &SpaceTimeField,
    e: &SpaceTimeField,
    opts: &SolverOptions,
) -> Result<SpaceTimeField> {
    ParabolicSolver::new(spec, y.grid(), *opts)?.solve_adjoint(y, u, e)
}
