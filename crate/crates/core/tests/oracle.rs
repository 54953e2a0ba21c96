//! The dense finite-dimensional reformulation and the function-space
//! optimizer certify each other.

use parakkt::grid::Grid;
use parakkt::kkt::{kkt_residuals, pointwise_control_update, KktPoint};
use parakkt::optimizer::{solve_ocp, OptimizerOptions};
use parakkt::oracle::{
    compare_multipliers, discretize_to_nlp, oracle_fields, solve_nlp_active_set,
};
use parakkt::problem::builtin_problem;
use parakkt::solvers::{solve_adjoint, SolverOptions};

#[test]
fn oracle_and_optimizer_agree_on_tracking_box() {
    let spec = builtin_problem("tracking_box_1d").unwrap();
    let grid = Grid::for_problem(&spec, &[5], 5).unwrap();
    let inst = discretize_to_nlp(&spec, &grid).unwrap();
    let nlp = solve_nlp_active_set(&inst, &vec![0.0; inst.n_vars()]).unwrap();
    assert!(
        nlp.mu.iter().any(|&m| m > 0.0),
        "instance should have an active constraint"
    );
    let sol = solve_ocp(&spec, &grid, &OptimizerOptions::default()).unwrap();

    let d = compare_multipliers(&inst, &nlp, &sol.point, true).unwrap();
    assert!(d.e_linf <= 1e-6 && d.phi_linf <= 1e-6, "{}", d.to_kv());

    // raw multipliers are off by the slab weight and the report shows it
    let raw = compare_multipliers(&inst, &nlp, &sol.point, false).unwrap();
    assert!(
        raw.e_linf >= 1e3 * d.e_linf.max(1e-12) && raw.e_linf > 1e-3,
        "{}",
        raw.to_kv()
    );

    // the PDE point is optimal for the dense problem
    let z_pde = inst.pack(&sol.point.y, &sol.point.u).unwrap();
    assert!(inst.objective(&z_pde) >= inst.objective(&nlp.z) - 1e-8);
}

#[test]
fn oracle_point_passes_the_field_residuals() {
    let spec = builtin_problem("tracking_box_1d").unwrap();
    let grid = Grid::for_problem(&spec, &[5], 5).unwrap();
    let inst = discretize_to_nlp(&spec, &grid).unwrap();
    let nlp = solve_nlp_active_set(&inst, &vec![0.0; inst.n_vars()]).unwrap();
    let (y, mut u) = inst.unpack(&nlp.z);
    let (_, mut e) = oracle_fields(&inst, &nlp, true);
    // level 0 lies outside the dense problem; complete it from the adjoint
    let phi = solve_adjoint(&spec, &y, &u, &e, &SolverOptions::default()).unwrap();
    for k in 0..grid.n_interior() {
        let x = grid.space.interior_coords(k);
        let (u0, e0) =
            pointwise_control_update(&spec, &x[..1], 0.0, y[(0, k)], phi[(0, k)]).unwrap();
        u[(0, k)] = u0;
        e[(0, k)] = e0;
    }
    let phi = solve_adjoint(&spec, &y, &u, &e, &SolverOptions::default()).unwrap();
    let (phi_o, _) = oracle_fields(&inst, &nlp, true);
    let n = grid.n_interior();
    for (a, b) in phi.as_slice()[n..].iter().zip(&phi_o.as_slice()[n..]) {
        assert!((a - b).abs() <= 1e-8);
    }
    let objective = inst.objective(&nlp.z);
    let point = KktPoint {
        y,
        u,
        phi,
        e,
        objective,
    };
    let r = kkt_residuals(&spec, &point).unwrap();
    assert!(
        r.kkt_max() <= 1e-6 && r.adjoint_res <= 1e-6,
        "{}",
        r.to_kv()
    );
}

#[test]
fn strictly_feasible_multipliers_vanish() {
    let spec = builtin_problem("strictly_feasible_1d").unwrap();
    let grid = Grid::for_problem(&spec, &[5], 5).unwrap();
    let inst = discretize_to_nlp(&spec, &grid).unwrap();
    let nlp = solve_nlp_active_set(&inst, &vec![0.0; inst.n_vars()]).unwrap();
    let sol = solve_ocp(&spec, &grid, &OptimizerOptions::default()).unwrap();
    let d = compare_multipliers(&inst, &nlp, &sol.point, true).unwrap();
    assert!(d.e_linf <= 1e-8);
    assert_eq!(sol.point.e.max(), 0.0);
    assert!(nlp.mu.iter().all(|&m| m == 0.0));
}

#[test]
fn example31_instance_converges() {
    let spec = builtin_problem("example31_poly").unwrap();
    let grid = Grid::for_problem(&spec, &[6], 5).unwrap();
    let inst = discretize_to_nlp(&spec, &grid).unwrap();
    let nlp = solve_nlp_active_set(&inst, &vec![0.0; inst.n_vars()]).unwrap();
    let sol = solve_ocp(&spec, &grid, &OptimizerOptions::default()).unwrap();
    let d = compare_multipliers(&inst, &nlp, &sol.point, true).unwrap();
    assert!(d.e_linf <= 1e-6 && d.phi_linf <= 1e-6, "{}", d.to_kv());
}
