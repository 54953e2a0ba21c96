//! Audits every catalog problem and checks its derivative expressions
//! against finite differences.
//!
//! ```text
//! cargo run --example validate_catalog
//! ```

use parakkt::problem::{builtin_problem, catalog_names, check_partials, validate_hypotheses};

fn main() -> parakkt::Result<()> {
    println!(
        "{:<22} {:>10} {:>10} {:>10} {:>6} {:>12}",
        "problem", "alpha", "min g_u", "min L_uu", "pass", "partials"
    );
    for name in catalog_names() {
        let spec = builtin_problem(name)?;
        let rep = validate_hypotheses(&spec, &spec.sample_box, 4096, 7)?;
        let partials = check_partials(&spec, 200, 7);
        println!(
            "{:<22} {:>10.4} {:>10.4} {:>10.4} {:>6} {:>12.2e}",
            name,
            rep.alpha_hat,
            rep.min_gu,
            rep.min_luu,
            rep.all_pass(),
            partials.worst_relative_error
        );
    }
    Ok(())
}
