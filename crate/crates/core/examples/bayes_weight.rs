//! The scalar denoiser `w* = argmin E[(x − w x̃)²]` has a closed form; compare
//! it with a least-squares fit on sampled data.
//!
//! ```text
//! cargo run --release --example bayes_weight
//! ```

use grouprobe::oracle::{bayes_weight, numeric_bayes_weight, BayesWeightInputs};

fn main() -> grouprobe::Result<()> {
    let cases = [
        ("core feature", BayesWeightInputs { sigma2: 0.6, mu2_pos: 1.0, mu2_neg: 1.0, sigma2_noise: 1.0 }),
        ("spurious feature", BayesWeightInputs { sigma2: 0.1, mu2_pos: 1.0, mu2_neg: 1.0, sigma2_noise: 1.0 }),
        ("uninformative", BayesWeightInputs { sigma2: 1.0, mu2_pos: 0.0, mu2_neg: 0.0, sigma2_noise: 1.0 }),
        ("asymmetric", BayesWeightInputs { sigma2: 0.3, mu2_pos: 4.0, mu2_neg: 0.25, sigma2_noise: 0.5 }),
    ];
    println!("{:<18} {:>10} {:>10} {:>10}", "case", "closed", "sampled", "|diff|");
    for (i, (name, inputs)) in cases.iter().enumerate() {
        let exact = bayes_weight(inputs)?;
        let sampled = numeric_bayes_weight(inputs, 1_000_000, i as u64)?;
        println!("{name:<18} {exact:>10.5} {sampled:>10.5} {:>10.2e}", (exact - sampled).abs());
    }
    Ok(())
}
