//! Outer fixed-point loop for the discrete KKT system.
//!
//! Each iteration solves the adjoint with the multiplier of the previous
//! iteration, takes the pointwise minimizer `u~` as a search target, and
//! moves `u <- u + s (u~ - u)` with an Armijo backtracking on `J`. Trial
//! controls are projected onto `u <= Phi(x, t, y(u))` before evaluation.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::field_io::fmt17;
use crate::grid::{Grid, SpaceTimeField};
use crate::kkt::{
    active_threshold, boundary_field, kkt_residuals_with, objective, pointwise_update_field,
    KktPoint, ResidualReport, TOL_FEAS,
};
use crate::problem::ProblemSpec;
use crate::solvers::{ParabolicSolver, SolverOptions};

use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct OptimizerOptions {
    pub max_outer: usize,
    /// Target for stationarity, complementarity, sign and feasibility.
    pub tol_kkt: f64,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub max_halvings: usize,
    /// Starting control; zero when absent.
    pub u_init: Option<SpaceTimeField>,
    pub solver: SolverOptions,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            max_outer: 200,
            tol_kkt: 1e-8,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            max_halvings: 30,
            u_init: None,
            solver: SolverOptions::default(),
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_kkt > 0.0)
            || !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0)
            || !(self.backtrack > 0.0 && self.backtrack < 1.0)
            || self.max_outer == 0
        {
            return Err(Error::InvalidArgument(format!(
                "bad optimizer options: tol_kkt {}, c1 {}, backtrack {}, max_outer {}",
                self.tol_kkt, self.armijo_c1, self.backtrack, self.max_outer
            )));
        }
        self.solver.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    /// `max_outer` reached; the point returned is the last iterate.
    MaxOuter,
    /// The line search found no acceptable step.
    Stalled,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub step: f64,
    pub stat_res: f64,
    pub comp_res: f64,
    pub feas_viol: f64,
    pub active_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveTrace {
    pub rows: Vec<TraceRow>,
    pub status: SolveStatus,
}

impl SolveTrace {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,J,step,stat_res,comp_res,feas_viol,active_count\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.iter,
                fmt17(r.objective),
                fmt17(r.step),
                fmt17(r.stat_res),
                fmt17(r.comp_res),
                fmt17(r.feas_viol),
                r.active_count
            );
        }
        s
    }
}

/// State of `u` after projecting onto `u <= Phi(y(u))`.
///
/// Since `Phi` depends on the state, projection and state solve alternate
/// until the control no longer moves by more than the feasibility tolerance.
pub fn project_feasible(
    solver: &ParabolicSolver<'_>,
    mut u: SpaceTimeField,
) -> Result<(SpaceTimeField, SpaceTimeField)> {
    let spec = solver.spec();
    for _ in 0..20 {
        let (y, _) = solver.solve_state(&u)?;
        let phi_b = boundary_field(spec, &y)?;
        let mut moved = 0.0f64;
        for (v, &b) in u.as_mut_slice().iter_mut().zip(phi_b.as_slice()) {
            if *v > b {
                moved = moved.max(*v - b);
                *v = b;
            }
        }
        if moved == 0.0 {
            return Ok((u, y));
        }
        if moved <= 1e-3 * TOL_FEAS {
            let (y, _) = solver.solve_state(&u)?;
            return Ok((u, y));
        }
    }
    let (y, _) = solver.solve_state(&u)?;
    Ok((u, y))
}

/// `L_u - phi` with `phi` the adjoint for `e = 0`; zero on level 0, which
/// the discrete objective does not depend on.
pub fn reduced_gradient_with(
    solver: &ParabolicSolver<'_>,
    u: &SpaceTimeField,
) -> Result<(SpaceTimeField, SpaceTimeField)> {
    let (y, _) = solver.solve_state(u)?;
    let zero = SpaceTimeField::zeros(solver.grid());
    let phi = solver.solve_adjoint(&y, u, &zero)?;
    let spec = solver.spec();
    let grid = solver.grid();
    let mut grad = SpaceTimeField::zeros(grid);
    for j in 1..grid.levels() {
        let t = grid.time.time(j);
        for k in 0..grid.n_interior() {
            grad[(j, k)] =
                spec.lagrangian.du.at(solver.x(k), t, y[(j, k)], u[(j, k)]) - phi[(j, k)];
        }
    }
    Ok((grad, y))
}

/// Gradient of the discrete reduced objective with respect to the control
/// inner product of [`Grid::control_inner`].
pub fn reduced_gradient(
    spec: &ProblemSpec,
    u: &SpaceTimeField,
    opts: &SolverOptions,
) -> Result<SpaceTimeField> {
    let solver = ParabolicSolver::new(spec, u.grid(), *opts)?;
    Ok(reduced_gradient_with(&solver, u)?.0)
}

/// Reduced objective `J(y(u), u)`.
pub fn reduced_objective(
    spec: &ProblemSpec,
    u: &SpaceTimeField,
    opts: &SolverOptions,
) -> Result<f64> {
    let (y, _) = crate::solvers::solve_state(spec, u, opts)?;
    Ok(objective(spec, &y, u))
}

pub struct OcpSolution {
    pub point: KktPoint,
    pub trace: SolveTrace,
    pub residuals: ResidualReport,
}

/// Computes a KKT point on `grid`.
pub fn solve_ocp(
    spec: &ProblemSpec,
    grid: &Arc<Grid>,
    opts: &OptimizerOptions,
) -> Result<OcpSolution> {
    opts.validate()?;
    let solver = ParabolicSolver::new(spec, grid, opts.solver)?;
    let u0 = match &opts.u_init {
        Some(u) => {
            u.check_on(grid, "initial control")?;
            u.check_finite("initial control")?;
            u.clone()
        }
        None => SpaceTimeField::zeros(grid),
    };
    let (mut u, mut y) = project_feasible(&solver, u0)?;
    let mut j_cur = objective(spec, &y, &u);
    let mut e_lag = SpaceTimeField::zeros(grid);
    let mut rows = Vec::new();
    let slack = |j: f64| 1e-14 * (1.0 + j.abs());
    let mut last = None;
    let mut status = SolveStatus::MaxOuter;

    for iter in 0..opts.max_outer {
        let phi = solver.solve_adjoint(&y, &u, &e_lag)?;
        let (u_target, e_target) = pointwise_update_field(spec, &y, &phi)?;
        let point = KktPoint {
            y: y.clone(),
            u: u.clone(),
            phi,
            e: e_target.clone(),
            objective: j_cur,
        };
        let res = kkt_residuals_with(&solver, &point)?;
        let eps_act = active_threshold(&e_target);
        let active_count = e_target.as_slice().iter().filter(|&&v| v > eps_act).count();
        let mut row = TraceRow {
            iter,
            objective: j_cur,
            step: 0.0,
            stat_res: res.stat_res,
            comp_res: res.comp_res,
            feas_viol: res.feas_viol,
            active_count,
        };
        if res.kkt_max() <= opts.tol_kkt && res.adjoint_res <= opts.tol_kkt {
            rows.push(row);
            last = Some((point, res));
            status = SolveStatus::Converged;
            break;
        }

        // Armijo on the reduced objective along u~ - u
        let mut dir = u_target.zip_map(&u, |a, b| a - b);
        dir.level_mut(0).fill(0.0);
        let (grad, _) = reduced_gradient_with(&solver, &u)?;
        let slope = grid.control_inner(&grad, &dir).min(0.0);
        let mut s = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let mut trial = u.zip_map(&dir, |a, d| a + s * d);
            trial.level_mut(0).copy_from_slice(u_target.level(0));
            let (trial, y_trial) = project_feasible(&solver, trial)?;
            let j_trial = objective(spec, &y_trial, &trial);
            if j_trial <= j_cur + opts.armijo_c1 * s * slope + slack(j_cur) {
                accepted = Some((trial, y_trial, j_trial));
                break;
            }
            s *= opts.backtrack;
        }
        last = Some((point, res));
        match accepted {
            Some((u_new, y_new, j_new)) => {
                row.step = s;
                rows.push(row);
                u = u_new;
                y = y_new;
                j_cur = j_new;
                e_lag = e_target;
            }
            None => {
                rows.push(row);
                status = SolveStatus::Stalled;
                break;
            }
        }
    }
    let (point, residuals) = match (status, last) {
        (SolveStatus::Converged, Some(l)) => l,
        (_, _) => {
            // certify the final iterate as it stands
            let phi = solver.solve_adjoint(&y, &u, &e_lag)?;
            let (_, e) = pointwise_update_field(spec, &y, &phi)?;
            let point = KktPoint {
                y: y.clone(),
                u: u.clone(),
                phi,
                e,
                objective: j_cur,
            };
            let res = kkt_residuals_with(&solver, &point)?;
            (point, res)
        }
    };
    Ok(OcpSolution {
        point,
        trace: SolveTrace { rows, status },
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::builtin_problem;

    #[test]
    fn trace_csv_layout() {
        let t = SolveTrace {
            rows: vec![TraceRow {
                iter: 0,
                objective: 0.5,
                step: 1.0,
                stat_res: 0.0,
                comp_res: 0.0,
                feas_viol: 0.0,
                active_count: 3,
            }],
            status: SolveStatus::Converged,
        };
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("iter,J,step,stat_res,comp_res,feas_viol,active_count")
        );
        assert_eq!(
            lines.next(),
            Some("0,5.0000000000000000e-1,1.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0,3")
        );
    }

    #[test]
    fn gradient_vanishes_at_the_target() {
        // y = 0 is the target when y_d = 0, and u = 0 makes L_u = 0
        let mut spec = builtin_problem("tracking_box_1d").unwrap();
        spec.lagrangian = crate::problem::ScalarMap2::parse([
            "0.5*y^2 + 0.05*u^2",
            "y",
            "0.1*u",
            "1",
            "0",
            "0.1",
        ])
        .unwrap();
        let grid = Grid::for_problem(&spec, &[7], 7).unwrap();
        let g =
            reduced_gradient(&spec, &SpaceTimeField::zeros(&grid), &Default::default()).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn bad_options_are_rejected() {
        let spec = builtin_problem("tracking_box_1d").unwrap();
        let grid = Grid::for_problem(&spec, &[5], 5).unwrap();
        let opts = OptimizerOptions {
            armijo_c1: 1.5,
            ..Default::default()
        };
        assert!(solve_ocp(&spec, &grid, &opts).is_err());
    }

    #[test]
    fn converged_start_exits_in_one_iteration() {
        let spec = builtin_problem("tracking_box_1d").unwrap();
        let grid = Grid::for_problem(&spec, &[9], 9).unwrap();
        let first = solve_ocp(&spec, &grid, &Default::default()).unwrap();
        assert!(first.trace.converged(), "{:?}", first.trace);
        let opts = OptimizerOptions {
            u_init: Some(first.point.u.clone()),
            ..Default::default()
        };
        let again = solve_ocp(&spec, &grid, &opts).unwrap();
        assert!(again.trace.converged());
        assert_eq!(again.trace.rows.len(), 1);
        assert_eq!(again.trace.rows[0].step, 0.0);
    }

    #[test]
    fn objective_is_monotone_along_the_trace() {
        let spec = builtin_problem("example31_poly").unwrap();
        let grid = Grid::for_problem(&spec, &[9], 9).unwrap();
        let sol = solve_ocp(&spec, &grid, &Default::default()).unwrap();
        for w in sol.trace.rows.windows(2) {
            assert!(w[1].objective <= w[0].objective + 1e-14 * (1.0 + w[0].objective.abs()));
        }
        assert!(sol.trace.converged(), "{:?}", sol.trace.rows.last());
    }
}
