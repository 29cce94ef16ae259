//! Where does a featurizer trained only on reconstruction put its L1 mass?
//! Prints the mean `ln(‖a_spur‖₁ / ‖a_core‖₁)` per (τ, lr, batch) cell;
//! negative means core features dominate.
//!
//! ```text
//! cargo run --release --example aux_log_ratio [out_dir]
//! ```

use std::path::PathBuf;

use grouprobe::experiment::{recipe, run_experiment};

fn main() -> grouprobe::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/fig3".into()));
    let outcome = run_experiment(&recipe("fig3")?, &out)?;
    println!("{:<16} {:>8} {:>6} {:>12}", "row", "lr", "batch", "log ratio");
    for (s, runs) in outcome.summary.iter().zip(&outcome.runs) {
        let ratio = s.log_ratio.map_or_else(|| "undefined".to_string(), |r| format!("{r:.3}"));
        println!("{:<16} {:>8.0e} {:>6} {:>12}", s.row, s.lr, s.batch, ratio);
        for r in runs {
            println!("    seed {}: a = {:.4}", r.seed, r.fit.params.a);
        }
    }
    Ok(())
}
