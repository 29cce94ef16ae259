//! Euclidean projection onto the L1 ball (and onto its boundary), plus the
//! Frobenius normalisation applied to the auxiliary head after each step.
//!
//! ```text
//! cargo run --example projection
//! ```

use grouprobe::linmodel::{frobenius_norm, l1_norm, normalize_frobenius, project_l1, project_l1_sphere};
use ndarray::array;

fn main() -> grouprobe::Result<()> {
    let v = array![0.8, -0.5, 0.05, 0.3];
    println!("v = {v:.3}, ‖v‖₁ = {:.3}", l1_norm(v.view()));
    for tau in [2.0, 1.0, 0.5, 0.1] {
        let ball = project_l1(v.view(), tau)?;
        let sphere = project_l1_sphere(v.view(), tau)?;
        println!(
            "τ = {tau:<4} ball {ball:.4} (‖·‖₁ {:.4})  sphere {sphere:.4} (‖·‖₁ {:.4})",
            l1_norm(ball.view()),
            l1_norm(sphere.view())
        );
    }

    // Projecting twice changes nothing.
    let once = project_l1(v.view(), 0.5)?;
    let twice = project_l1(once.view(), 0.5)?;
    println!("idempotent: max |Δ| = {:.1e}", (&once - &twice).mapv(f64::abs).fold(0.0, |m: f64, &x| m.max(x)));

    let w = array![[3.0, -1.0], [0.5, 2.0]];
    let n = normalize_frobenius(w.view(), 1.0)?;
    println!("W: ‖W‖_F = {:.3} → {:.3}", frobenius_norm(w.view()), frobenius_norm(n.view()));
    Ok(())
}
