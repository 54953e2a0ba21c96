//! Hölder fits of the KKT fields and the jump of the multiplier across the
//! active-set boundary under refinement.
//!
//! ```text
//! cargo run --release --example holder_diagnostics
//! ```

use parakkt::grid::Grid;
use parakkt::optimizer::{solve_ocp, OptimizerOptions};
use parakkt::problem::builtin_problem;
use parakkt::regularity::multiplier_continuity_report;

fn main() -> parakkt::Result<()> {
    let spec = builtin_problem("tracking_box_1d")?;
    for n in [33, 65, 129] {
        let grid = Grid::for_problem(&spec, &[n], 2 * n - 1)?;
        let point = solve_ocp(&spec, &grid, &OptimizerOptions::default())?.point;
        let rep = multiplier_continuity_report(&spec, &point, 20_000, 5)?;
        let fits: Vec<String> = rep
            .fits
            .iter()
            .map(|(name, f)| format!("{name} {:.3}", f.alpha_hat))
            .collect();
        println!(
            "{n:>3} nodes: jump {:.4e} | alpha {}",
            rep.active_boundary_jump,
            fits.join(", ")
        );
    }
    Ok(())
}
