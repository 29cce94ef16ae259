//! Check every hand-derived gradient against central differences on random
//! small problems.
//!
//! ```text
//! cargo run --example gradient_check [trials]
//! ```

use grouprobe::oracle::{grad_check, GRAD_CHECK_LOSSES};

fn main() -> grouprobe::Result<()> {
    let trials: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let checks = grad_check(trials, 7)?;
    println!("{:<13} {:>12} {:>12}", "loss", "median", "max");
    for name in GRAD_CHECK_LOSSES {
        let mut errs: Vec<f64> = checks.iter().filter(|c| c.loss == name).map(|c| c.relative_error).collect();
        errs.sort_by(f64::total_cmp);
        println!("{name:<13} {:>12.2e} {:>12.2e}", errs[errs.len() / 2], errs[errs.len() - 1]);
    }
    Ok(())
}
