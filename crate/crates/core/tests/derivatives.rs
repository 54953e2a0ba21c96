//! First and second derivatives of the discrete problem against finite
//! differences and a dense linear-quadratic oracle.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use parakkt::grid::{Grid, SpaceTimeField};
use parakkt::kkt::{constraint_field, objective};
use parakkt::optimizer::{reduced_gradient, reduced_objective, solve_ocp, OptimizerOptions};
use parakkt::problem::{builtin_problem, ProblemSpec};
use parakkt::soc::{linearized_state, measure_direction, quadratic_form};
use parakkt::solvers::{solve_adjoint, solve_state, ParabolicSolver, SolverOptions};

fn random_direction(grid: &std::sync::Arc<Grid>, rng: &mut ChaCha8Rng) -> SpaceTimeField {
    let (a, b, c) = (
        rng.gen_range(-1.0..1.0),
        rng.gen_range(1.0..5.0),
        rng.gen_range(-2.0..2.0),
    );
    let mut d = SpaceTimeField::from_fn(grid, |x, t| {
        a + (b * x[0] + c * t).sin() + 0.3 * (7.0 * x[0] * t).cos()
    });
    d.level_mut(0).fill(0.0);
    d
}

#[test]
fn reduced_gradient_matches_central_differences() {
    let opts = SolverOptions::default();
    for name in ["tracking_box_1d", "example31_poly", "strictly_feasible_1d"] {
        let spec = builtin_problem(name).unwrap();
        let grid = Grid::for_problem(&spec, &[9], 9).unwrap();
        let u = SpaceTimeField::from_fn(&grid, |x, t| 0.8 * x[0] - 0.4 * t + 0.1);
        let grad = reduced_gradient(&spec, &u, &opts).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let d = random_direction(&grid, &mut rng);
            let s = 1e-4;
            let jp = reduced_objective(&spec, &u.zip_map(&d, |p, q| p + s * q), &opts).unwrap();
            let jm = reduced_objective(&spec, &u.zip_map(&d, |p, q| p - s * q), &opts).unwrap();
            let fd = (jp - jm) / (2.0 * s);
            let adj = grid.control_inner(&grad, &d);
            assert!(
                (adj - fd).abs() <= 1e-6 * fd.abs().max(1e-3),
                "{name}: {adj} vs {fd}"
            );
        }
    }
}

/// `J + sum w e g` at a control, with `e` held fixed.
fn lagrangian(spec: &ProblemSpec, u: &SpaceTimeField, e: &SpaceTimeField) -> f64 {
    let (y, _) = solve_state(spec, u, &SolverOptions::default()).unwrap();
    let g = constraint_field(spec, &y, u).unwrap();
    let grid = u.grid();
    let n = grid.n_interior();
    let eg: f64 = e.as_slice()[n..]
        .iter()
        .zip(&g.as_slice()[n..])
        .map(|(a, b)| a * b)
        .sum();
    objective(spec, &y, u) + grid.slab_weight() * eg
}

#[test]
fn lagrangian_gradient_with_fixed_multiplier() {
    let spec = builtin_problem("example31_poly").unwrap();
    let grid = Grid::for_problem(&spec, &[9], 9).unwrap();
    let opts = SolverOptions::default();
    let u = SpaceTimeField::from_fn(&grid, |x, t| 0.5 * x[0] - 0.2 * t);
    let e = SpaceTimeField::from_fn(&grid, |x, t| (0.3 + x[0] * t).max(0.0));
    let (y, _) = solve_state(&spec, &u, &opts).unwrap();
    let phi = solve_adjoint(&spec, &y, &u, &e, &opts).unwrap();
    let mut grad = SpaceTimeField::zeros(&grid);
    for j in 1..grid.levels() {
        let t = grid.time.time(j);
        for k in 0..grid.n_interior() {
            let x = grid.space.interior_coords(k);
            let (yv, uv) = (y[(j, k)], u[(j, k)]);
            grad[(j, k)] = spec.lagrangian.du.at(&x[..1], t, yv, uv)
                + e[(j, k)] * spec.constraint.du.at(&x[..1], t, yv, uv)
                - phi[(j, k)];
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let d = random_direction(&grid, &mut rng);
        let s = 1e-4;
        let fd = (lagrangian(&spec, &u.zip_map(&d, |p, q| p + s * q), &e)
            - lagrangian(&spec, &u.zip_map(&d, |p, q| p - s * q), &e))
            / (2.0 * s);
        let adj = grid.control_inner(&grad, &d);
        assert!(
            (adj - fd).abs() <= 1e-6 * fd.abs().max(1e-3),
            "{adj} vs {fd}"
        );
    }
}

#[test]
fn quadratic_form_matches_second_differences() {
    for name in ["tracking_box_1d", "example31_poly"] {
        let spec = builtin_problem(name).unwrap();
        let grid = Grid::for_problem(&spec, &[9], 9).unwrap();
        let point = solve_ocp(&spec, &grid, &OptimizerOptions::default())
            .unwrap()
            .point;
        let solver = ParabolicSolver::new(&spec, &grid, SolverOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let v = random_direction(&grid, &mut rng);
            let z = linearized_state(&solver, &point.y, &v).unwrap();
            let dir = measure_direction(&solver, &point, v.clone(), z).unwrap();
            let q = quadratic_form(&spec, &point, &dir).unwrap();
            let s = 1e-3;
            let l0 = lagrangian(&spec, &point.u, &point.e);
            let lp = lagrangian(&spec, &point.u.zip_map(&v, |p, q| p + s * q), &point.e);
            let lm = lagrangian(&spec, &point.u.zip_map(&v, |p, q| p - s * q), &point.e);
            let fd = (lp - 2.0 * l0 + lm) / (s * s);
            assert!(
                (q - fd).abs() <= 1e-4 * q.abs().max(1e-6),
                "{name}: {q} vs {fd}"
            );
        }
    }
}

/// Dense control-to-state map of the linear problem `y_t - y_xx + y = u`
/// with homogeneous data, built from the scheme's defining relations.
fn dense_state_map(nodes: usize, levels: usize) -> DMatrix<f64> {
    let n = nodes - 2;
    let h = 1.0 / (nodes - 1) as f64;
    let tau = 1.0 / (levels - 1) as f64;
    let steps = levels - 1;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = 1.0 / tau + 1.0 + 2.0 / (h * h);
        if i > 0 {
            m[(i, i - 1)] = -1.0 / (h * h);
        }
        if i + 1 < n {
            m[(i, i + 1)] = -1.0 / (h * h);
        }
    }
    let minv = m.try_inverse().unwrap();
    let mut s = DMatrix::<f64>::zeros(n * steps, n * steps);
    for j in 0..steps {
        // y_j = M^-1 (y_{j-1} / tau + u_j)
        let mut block = minv.clone();
        for i in (0..=j).rev() {
            s.view_mut((j * n, i * n), (n, n)).copy_from(&block);
            block = &minv * &block / tau;
        }
    }
    s
}

#[test]
fn linear_quadratic_gradient_and_solution_match_dense_oracle() {
    let spec = builtin_problem("strictly_feasible_1d").unwrap();
    let (nodes, levels) = (9, 9);
    let grid = Grid::for_problem(&spec, &[nodes], levels).unwrap();
    let n = nodes - 2;
    let s = dense_state_map(nodes, levels);
    let target = DVector::from_iterator(
        n * (levels - 1),
        (1..levels).flat_map(|_| {
            (0..n).map(|k| 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (nodes - 1) as f64).sin())
        }),
    );

    // gradient at an arbitrary control: S^T (S u - z) + 0.1 u
    let u = SpaceTimeField::from_fn(&grid, |x, t| (3.0 * x[0]).sin() + t);
    let uv = DVector::from_column_slice(&u.as_slice()[n..]);
    let want = s.transpose() * (&s * &uv - &target) + 0.1 * &uv;
    let grad = reduced_gradient(&spec, &u, &SolverOptions::default()).unwrap();
    let got = DVector::from_column_slice(&grad.as_slice()[n..]);
    assert!((got - &want).amax() <= 1e-10 * want.amax().max(1.0));

    // the constraint never binds, so the optimum solves the normal equations
    let normal = s.transpose() * &s + 0.1 * DMatrix::<f64>::identity(s.ncols(), s.ncols());
    let u_star = normal.lu().solve(&(s.transpose() * &target)).unwrap();
    let sol = solve_ocp(&spec, &grid, &OptimizerOptions::default()).unwrap();
    let got = DVector::from_column_slice(&sol.point.u.as_slice()[n..]);
    assert!((got - u_star).amax() <= 1e-6);
    assert_eq!(sol.point.e.max(), 0.0);
}
