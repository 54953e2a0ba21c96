//! Observed convergence orders of the state solver against a manufactured
//! solution, in space (tau tied to h^2) and in time (fine h).
//!
//! ```text
//! cargo run --release --example mms_convergence
//! ```

use parakkt::grid::{Grid, SpaceTimeField};
use parakkt::problem::{builtin_problem, mms_exact_state, mms_forcing};
use parakkt::solvers::{solve_state, SolverOptions};

fn error(nodes: usize, levels: usize) -> parakkt::Result<f64> {
    let spec = builtin_problem("mms_cubic_1d")?;
    let grid = Grid::for_problem(&spec, &[nodes], levels)?;
    let u = SpaceTimeField::from_fn(&grid, |x, t| mms_forcing(x[0], t));
    let (y, _) = solve_state(&spec, &u, &SolverOptions::default())?;
    let exact = SpaceTimeField::from_fn(&grid, |x, t| mms_exact_state(x[0], t));
    Ok(y.max_abs_diff(&exact))
}

fn table(label: &str, runs: &[(usize, usize)]) -> parakkt::Result<()> {
    println!("{label}");
    let mut prev: Option<f64> = None;
    for &(n, nt) in runs {
        let e = error(n, nt)?;
        match prev {
            Some(p) => println!(
                "  {n:>4} x {nt:>5}  err {e:.3e}  order {:.3}",
                (p / e).log2()
            ),
            None => println!("  {n:>4} x {nt:>5}  err {e:.3e}"),
        }
        prev = Some(e);
    }
    Ok(())
}

fn main() -> parakkt::Result<()> {
    let space: Vec<_> = [9, 17, 33]
        .iter()
        .map(|&n| (n, (n - 1) * (n - 1) + 1))
        .collect();
    table("space (tau = h^2)", &space)?;
    let time: Vec<_> = [11, 21, 41, 81].iter().map(|&nt| (257, nt)).collect();
    table("time (257 nodes)", &time)
}
