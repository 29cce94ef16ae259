//! A cut-down version of the `pareto-default` sweep: fewer cells, seeds and
//! epochs, then the non-dominated (average, worst-group) points.
//!
//! ```text
//! cargo run --release --example pareto_sweep [out_dir]
//! ```

use std::path::PathBuf;

use grouprobe::experiment::{pareto_default, run_sweep};

fn main() -> grouprobe::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/pareto_demo".into()));
    let mut cfg = pareto_default();
    cfg.base.seeds = vec![0, 1];
    cfg.base.optim.epochs = 100;
    cfg.grid.lr = vec![1e-2];
    cfg.grid.batch_size = vec![64];

    let res = run_sweep(&cfg, &out)?;
    println!("{} cells:", res.points.len());
    for p in &res.points {
        let mark = if res.front.contains(p) { "*" } else { " " };
        println!(
            "{mark} avg {:.4} wg {:.4}  α_aux {:.3} α_reg {:.3}",
            p.avg_acc, p.wg_acc, p.tag.alpha_aux, p.tag.alpha_reg
        );
    }
    println!("front written to {}", out.join("pareto.csv").display());
    Ok(())
}
