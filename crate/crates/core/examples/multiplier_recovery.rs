//! Solves a problem, then recovers the multiplier from the state and
//! adjoint by both closed-form expressions and compares them with the
//! optimizer's multiplier.
//!
//! ```text
//! cargo run --release --example multiplier_recovery [problem]
//! ```

use parakkt::grid::Grid;
use parakkt::kkt::{h_potential_audit, recover_multiplier_division, recover_multiplier_max};
use parakkt::optimizer::{solve_ocp, OptimizerOptions};
use parakkt::problem::builtin_problem;

fn main() -> parakkt::Result<()> {
    let name = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "tracking_box_1d".into());
    let spec = builtin_problem(&name)?;
    let nodes = vec![33; spec.dim];
    let grid = Grid::for_problem(&spec, &nodes, 65)?;
    let sol = solve_ocp(&spec, &grid, &OptimizerOptions::default())?;
    let p = &sol.point;
    let e_div = recover_multiplier_division(&spec, &p.y, &p.u, &p.phi)?;
    let e_max = recover_multiplier_max(&spec, &p.y, &p.phi)?;
    let (_, h_max) = h_potential_audit(&spec, &p.y, &p.u)?;
    println!("status              {:?}", sol.trace.status);
    println!("max e               {:.6e}", p.e.max());
    println!("|e_div - e_max|     {:.3e}", e_div.max_abs_diff(&e_max));
    println!("|e_div - e|         {:.3e}", e_div.max_abs_diff(&p.e));
    println!("max |H|             {:.3e}", h_max);
    Ok(())
}
