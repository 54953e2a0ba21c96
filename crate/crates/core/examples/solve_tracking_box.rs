//! Solves the 1-d tracking problem with a time-dependent upper bound on the
//! control and prints the KKT residuals and the active set size.
//!
//! ```text
//! cargo run --release --example solve_tracking_box [nodes] [levels]
//! ```

use std::time::Instant;

use parakkt::grid::Grid;
use parakkt::kkt::active_threshold;
use parakkt::optimizer::{solve_ocp, OptimizerOptions};
use parakkt::problem::builtin_problem;

fn main() -> parakkt::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>());
    let nodes = args.next().transpose().ok().flatten().unwrap_or(33);
    let levels = args.next().transpose().ok().flatten().unwrap_or(65);

    let spec = builtin_problem("tracking_box_1d")?;
    let grid = Grid::for_problem(&spec, &[nodes], levels)?;
    let start = Instant::now();
    let sol = solve_ocp(&spec, &grid, &OptimizerOptions::default())?;
    let elapsed = start.elapsed();

    println!(
        "status      {:?} after {} iterations",
        sol.trace.status,
        sol.trace.rows.len()
    );
    println!("objective   {:.12e}", sol.point.objective);
    print!("{}", sol.residuals.to_kv());
    let eps = active_threshold(&sol.point.e);
    let active = sol.point.e.as_slice().iter().filter(|&&v| v > eps).count();
    println!(
        "active      {active} of {} nodes, max e = {:.4e}, max u = {:.4}",
        sol.point.e.as_slice().len(),
        sol.point.e.max(),
        sol.point.u.max()
    );
    println!("time        {:.2?}", elapsed);
    Ok(())
}
