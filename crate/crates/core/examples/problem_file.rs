//! Writes a catalog problem to a file, edits the constraint, reads it back
//! and solves the edited problem.
//!
//! ```text
//! cargo run --release --example problem_file [path]
//! ```

use std::path::PathBuf;

use parakkt::grid::Grid;
use parakkt::optimizer::{solve_ocp, OptimizerOptions};
use parakkt::problem::{builtin_problem, read_problem, validate_hypotheses, write_problem_string};

fn main() -> parakkt::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("tracking.toml"));
    let text = write_problem_string(&builtin_problem("tracking_box_1d")?)?;
    println!("{text}");
    // tighten the bound from the catalog value to a flat cap
    let spec0 = builtin_problem("tracking_box_1d")?;
    let g_src = spec0
        .constraint
        .value
        .source()
        .map(|e| e.to_string())
        .unwrap_or_default();
    let edited = text.replace(&g_src, "u - 0.5");
    std::fs::write(&path, edited).map_err(|e| parakkt::Error::Io {
        path: path.clone(),
        source: e,
    })?;

    let spec = read_problem(&path)?;
    let rep = validate_hypotheses(&spec, &spec.sample_box, 1024, 0)?;
    println!(
        "read {} (all hypotheses pass: {})",
        path.display(),
        rep.all_pass()
    );
    let grid = Grid::for_problem(&spec, &[33], 65)?;
    let sol = solve_ocp(&spec, &grid, &OptimizerOptions::default())?;
    println!(
        "status {:?}, objective {:.10e}, max u {:.6}",
        sol.trace.status,
        sol.point.objective,
        sol.point.u.max()
    );
    Ok(())
}
