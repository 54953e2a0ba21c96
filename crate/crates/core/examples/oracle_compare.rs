//! Solves a small instance both with the function-space optimizer and as a
//! dense finite-dimensional problem, then compares the multipliers.
//!
//! ```text
//! cargo run --example oracle_compare [nodes] [levels]
//! ```

use parakkt::grid::Grid;
use parakkt::optimizer::{solve_ocp, OptimizerOptions};
use parakkt::oracle::{compare_multipliers, discretize_to_nlp, solve_nlp_active_set};
use parakkt::problem::builtin_problem;

fn main() -> parakkt::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().ok());
    let nodes = args.next().flatten().unwrap_or(5);
    let levels = args.next().flatten().unwrap_or(5);
    let spec = builtin_problem("tracking_box_1d")?;
    let grid = Grid::for_problem(&spec, &[nodes], levels)?;

    let inst = discretize_to_nlp(&spec, &grid)?;
    let nlp = solve_nlp_active_set(&inst, &vec![0.0; inst.n_vars()])?;
    println!(
        "oracle: {} variables, {} Newton steps, {} active-set changes, stationarity {:.1e}",
        inst.n_vars(),
        nlp.iterations,
        nlp.active_changes,
        nlp.stationarity
    );
    let sol = solve_ocp(&spec, &grid, &OptimizerOptions::default())?;
    println!("scaled multipliers:");
    print!(
        "{}",
        compare_multipliers(&inst, &nlp, &sol.point, true)?.to_kv()
    );
    println!("raw multipliers:");
    print!(
        "{}",
        compare_multipliers(&inst, &nlp, &sol.point, false)?.to_kv()
    );
    Ok(())
}
