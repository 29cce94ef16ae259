//! Evaluate the worst-group error bound as the featurizer's spurious mass
//! grows, and the lower bound on core mass implied by a transfer error.
//!
//! ```text
//! cargo run --example bounds
//! ```

use grouprobe::oracle::{transfer_core_mass_lower_bound, worst_group_error_bound, BoundInputs};

fn main() -> grouprobe::Result<()> {
    let base = BoundInputs {
        gamma: 1.0,
        sigma_spur: 0.3,
        eta: 0.1,
        tau: 1.0,
        lam: 0.0,
        d_c: 5,
        d_s: 5,
        eps_trans: 0.05,
    };
    println!("{:>6} {:>12}", "λ", "wg error ≤");
    for lam in [0.0, 0.1, 0.25, 0.5, 1.0] {
        let b = BoundInputs { lam, ..base };
        println!("{lam:>6} {:>12.4e}", worst_group_error_bound(&b)?);
    }

    println!();
    println!("{:>6} {:>10} {:>8}", "ε", "core ≥", "vacuous");
    for eps_trans in [0.001, 0.01, 0.05, 0.2, 0.45] {
        let b = BoundInputs {
            eps_trans,
            eta: 1.0,
            tau: 0.05,
            d_c: 10,
            d_s: 2,
            ..base
        };
        let m = transfer_core_mass_lower_bound(&b)?;
        println!("{eps_trans:>6} {:>10.4} {:>8}", m.value, m.vacuous);
    }
    Ok(())
}
