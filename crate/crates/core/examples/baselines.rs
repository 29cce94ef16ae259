//! Train ERM, JTT, groupDRO and RegMTL on the same seeded task and compare
//! worst-group accuracy on a balanced test set.
//!
//! ```text
//! cargo run --release --example baselines [seed] [epochs]
//! ```

use grouprobe::baselines::{fit, Method, MethodConfigs, TaskData, TrainerSetup};
use grouprobe::{GroupDataSpec, InitConfig, LossWeights, OptimConfig, Projection, SelectionStrategy};

fn main() -> grouprobe::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let epochs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let data = TaskData::synthetic(&GroupDataSpec::table2(), 100, 250, seed)?;

    let base = |tau: Option<f64>, alpha_aux: f64| TrainerSetup {
        optim: OptimConfig {
            epochs,
            seed,
            projection: Projection::Sphere,
            ..OptimConfig::default()
        },
        weights: LossWeights {
            alpha_aux,
            alpha_reg: 0.0,
            lambda_l2: 1.0,
        },
        tau,
        init: InitConfig::default(),
        selector: SelectionStrategy::ValGp,
    };
    let extra = MethodConfigs::default();

    println!("{:<10} {:>6} {:>8} {:>8} {:>8}", "method", "epoch", "val wg", "test wg", "test avg");
    for (method, setup) in [
        (Method::Erm, base(None, 0.0)),
        (Method::Jtt, base(None, 0.0)),
        (Method::GroupDro, base(None, 0.0)),
        (Method::RegMtl, base(Some(0.1), 10.0)),
    ] {
        let r = fit(method, &data, &setup, &extra)?;
        println!(
            "{:<10} {:>6} {:>8.3} {:>8.3} {:>8.3}",
            method.name(),
            r.selected_epoch,
            r.val.wg_acc,
            r.test.wg_acc,
            r.test.avg_acc
        );
        if let Some(q) = r.group_dro.as_ref().map(|s| s.final_q) {
            println!("           final group weights q = {q:.3?}");
        }
        if let Some(j) = &r.jtt {
            println!("           {j:?}");
        }
    }
    Ok(())
}
