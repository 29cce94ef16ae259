//! End-task-only training vs regularized multitask training at two L1 radii,
//! over the lr × batch grid and five seeds.
//!
//! ```text
//! cargo run --release --example end_vs_regmtl [out_dir]
//! ```

use std::path::PathBuf;

use grouprobe::experiment::{recipe, row_report, run_experiment};

fn main() -> grouprobe::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/table2".into()));
    let plan = recipe("table2")?;
    let outcome = run_experiment(&plan, &out)?;

    println!("{:<18} {:>22} {:>10} {:>30}", "row", "fixed wg (id avg)", "", "val-selected wg (id avg)");
    for r in row_report(&outcome.summary) {
        println!(
            "{:<18} {:>7.2} ± {:<5.2} ({:>6.2}) {:>14} {:>7.2} ± {:<5.2} ({:>6.2})",
            r.row,
            100.0 * r.fixed.test_wg.0,
            100.0 * r.fixed.test_wg.1,
            100.0 * r.fixed.test_id_avg.0,
            format!("lr {:e} b {}", r.selected.lr, r.selected.batch),
            100.0 * r.selected.test_wg.0,
            100.0 * r.selected.test_wg.1,
            100.0 * r.selected.test_id_avg.0,
        );
    }
    println!("\nper-cell summary: {}", out.join("summary.csv").display());
    Ok(())
}
