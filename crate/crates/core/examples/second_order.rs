//! Second-order audits at a certified point: Legendre minimum, samples of
//! the quadratic form on critical directions, and the growth probe.
//!
//! ```text
//! cargo run --release --example second_order [problem]
//! ```

use parakkt::grid::Grid;
use parakkt::optimizer::{solve_ocp, OptimizerOptions};
use parakkt::problem::builtin_problem;
use parakkt::soc::{
    legendre_min, quadratic_form, quadratic_growth_probe, sample_critical_direction,
};

fn main() -> parakkt::Result<()> {
    let name = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "tracking_box_1d".into());
    let spec = builtin_problem(&name)?;
    let nodes = vec![33; spec.dim];
    let grid = Grid::for_problem(&spec, &nodes, 65)?;
    let point = solve_ocp(&spec, &grid, &OptimizerOptions::default())?.point;

    let lm = legendre_min(&spec, &point)?;
    println!(
        "legendre min {:.15} at t = {:.4}, x1 = {:.4}",
        lm.value, lm.t, lm.x[0]
    );
    for seed in 0..5 {
        let dir = sample_critical_direction(&spec, &point, seed)?;
        let q = quadratic_form(&spec, &point, &dir)?;
        println!(
            "direction {seed}: Q = {q:+.6e}  c1 = {:+.2e}  c2 = {:.1e}  c3 = {:.1e}",
            dir.c1_value, dir.c2_residual, dir.c3_violation
        );
    }
    let probe = quadratic_growth_probe(&spec, &point, 50, 1e-2, 3)?;
    let min_ratio = probe
        .trials
        .iter()
        .filter(|t| t.feasible)
        .map(|t| t.ratio)
        .fold(f64::INFINITY, f64::min);
    println!(
        "growth: kappa_hat {:.4e}, min ratio {:.4e}, dropped {}",
        probe.kappa_hat, min_ratio, probe.dropped
    );
    Ok(())
}
