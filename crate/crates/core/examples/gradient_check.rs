//! Compares the adjoint gradient with central differences of the discrete
//! reduced objective along random smooth directions.
//!
//! ```text
//! cargo run --example gradient_check [problem]
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use parakkt::grid::{Grid, SpaceTimeField};
use parakkt::optimizer::{reduced_gradient, reduced_objective};
use parakkt::problem::builtin_problem;
use parakkt::solvers::SolverOptions;

fn main() -> parakkt::Result<()> {
    let name = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "example31_poly".into());
    let spec = builtin_problem(&name)?;
    let nodes = vec![9; spec.dim];
    let grid = Grid::for_problem(&spec, &nodes, 9)?;
    let opts = SolverOptions::default();
    let u = SpaceTimeField::from_fn(&grid, |x, t| 0.5 * x[0] - 0.3 * t);
    let grad = reduced_gradient(&spec, &u, &opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..10 {
        let (a, b) = (rng.gen_range(-1.0..1.0), rng.gen_range(1.0..4.0));
        let d = SpaceTimeField::from_fn(&grid, |x, t| a + (b * x[0] + t).sin());
        let s = 1e-4;
        let jp = reduced_objective(&spec, &u.zip_map(&d, |p, q| p + s * q), &opts)?;
        let jm = reduced_objective(&spec, &u.zip_map(&d, |p, q| p - s * q), &opts)?;
        let fd = (jp - jm) / (2.0 * s);
        let adj = grid.control_inner(&grad, &d);
        println!(
            "dir {i}: adjoint {adj:+.12e}  fd {fd:+.12e}  rel {:.2e}",
            (adj - fd).abs() / fd.abs().max(1e-12)
        );
    }
    Ok(())
}
