//! Closed-form references: the Bayes-optimal denoising weight, central
//! finite differences, the normal CDF and its inverse, and the worst-group
//! error and core-mass bounds.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linmodel::ModelParams;
use crate::objectives::{activation_penalty, combined_loss, end_loss, recon_loss, weighted_end_loss, LossEval, LossWeights};
use crate::seeding;
use crate::synthgen::{AuxDataset, LabeledDataset};

/// Standard normal CDF, `½ erfc(−x/√2)`.
pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse of [`phi`] by bisection, run until the bracket stops shrinking.
pub fn phi_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!("Φ⁻¹ needs p in (0, 1), got {p}")));
    }
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if phi(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesWeightInputs {
    /// Within-class variance of the feature.
    pub sigma2: f64,
    /// Squared class-conditional means for `y = +1` and `y = −1`.
    pub mu2_pos: f64,
    pub mu2_neg: f64,
    pub sigma2_noise: f64,
}

impl BayesWeightInputs {
    fn validate(&self) -> Result<f64> {
        for (name, v) in [
            ("sigma2", self.sigma2),
            ("mu2_pos", self.mu2_pos),
            ("mu2_neg", self.mu2_neg),
            ("sigma2_noise", self.sigma2_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        let signal = self.sigma2 + 0.5 * (self.mu2_pos + self.mu2_neg);
        if signal + self.sigma2_noise == 0.0 {
            return Err(Error::Degenerate("Bayes weight denominator is zero".into()));
        }
        Ok(signal)
    }
}

/// Minimiser of `E[(x − w x̃)²]` for `x̃ = x + noise`.
pub fn bayes_weight(inputs: &BayesWeightInputs) -> Result<f64> {
    let signal = inputs.validate()?;
    Ok(signal / (signal + inputs.sigma2_noise))
}

/// Monte-Carlo estimate of [`bayes_weight`]: sample `(y, x, x̃)` and solve
/// the empirical least-squares problem, `Σ x x̃ / Σ x̃²`.
pub fn numeric_bayes_weight(inputs: &BayesWeightInputs, samples: usize, seed: u64) -> Result<f64> {
    inputs.validate()?;
    if samples < 10_000 {
        return Err(Error::InvalidInput(format!("need at least 10^4 samples, got {samples}")));
    }
    let mut rng = seeding::stream(seed, seeding::ORACLE);
    let (mu_pos, mu_neg) = (inputs.mu2_pos.sqrt(), -inputs.mu2_neg.sqrt());
    let (sd, sd_noise) = (inputs.sigma2.sqrt(), inputs.sigma2_noise.sqrt());
    let (mut sxy, mut syy) = (0.0, 0.0);
    for _ in 0..samples {
        let mu = if rng.random::<bool>() { mu_pos } else { mu_neg };
        let z: f64 = StandardNormal.sample(&mut rng);
        let e: f64 = StandardNormal.sample(&mut rng);
        let x = mu + sd * z;
        let xt = x + sd_noise * e;
        sxy += x * xt;
        syy += xt * xt;
    }
    if syy == 0.0 {
        return Err(Error::Degenerate("all sampled noisy features are zero".into()));
    }
    Ok(sxy / syy)
}

/// Central differences `(L(θ + h eₖ) − L(θ − h eₖ)) / 2h`.
pub fn finite_diff_grad<F>(mut loss: F, theta: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("step must be > 0, got {h}")));
    }
    let mut probe = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for k in 0..theta.len() {
        probe[k] = theta[k] + h;
        let up = loss(&probe)?;
        probe[k] = theta[k] - h;
        let down = loss(&probe)?;
        probe[k] = theta[k];
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::InvalidInput(format!("loss is not finite around coordinate {k}")));
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// `‖g − ĝ‖₂ / max(‖g‖₂, ‖ĝ‖₂, 1e-8)`.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(analytic).max(norm(numeric)).max(1e-8)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub loss: String,
    pub trial: usize,
    pub relative_error: f64,
}

pub const GRAD_CHECK_LOSSES: [&str; 5] = ["end", "weighted_end", "recon", "activation", "combined"];

/// Compare every analytic gradient against central differences on `trials`
/// random parameter/batch draws. Featurizer entries are kept at least 0.05
/// away from zero so the L1 kink is never inside the difference stencil.
pub fn grad_check(trials: usize, seed: u64) -> Result<Vec<GradCheck>> {
    let mut out = Vec::new();
    let h = 1e-6;
    for trial in 0..trials {
        let mut rng = seeding::stream(seeding::derive(seed, trial as u64), seeding::ORACLE);
        let d = rng.random_range(1..=4usize);
        let n = rng.random_range(1..=8usize);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| normal.sample(&mut rng)).collect() };
        let features = ndarray::Array2::from_shape_vec((n, d), draw(n * d)).expect("shape");
        let noised = ndarray::Array2::from_shape_vec((n, d), draw(n * d)).expect("shape");
        let targets = ndarray::Array2::from_shape_vec((n, d), draw(n * d)).expect("shape");
        let w_end = ndarray::Array1::from(draw(d));
        let w_aux = ndarray::Array2::from_shape_vec((d, d), draw(d * d)).expect("shape");
        let labels: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let attrs: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let a: ndarray::Array1<f64> = (0..d)
            .map(|_| {
                let m: f64 = rng.random_range(0.05..1.5);
                if rng.random::<bool>() {
                    m
                } else {
                    -m
                }
            })
            .collect();
        let omega: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
        let weights = LossWeights {
            alpha_aux: rng.random_range(0.1..10.0),
            alpha_reg: rng.random_range(0.1..2.0),
            lambda_l2: rng.random_range(0.0..2.0),
        };
        let params = ModelParams {
            a,
            w_end,
            w_aux,
            tau: None,
            fro_radius: 1.0,
        };
        let batch = LabeledDataset::new(features, labels, attrs)?;
        let aux = AuxDataset::new(noised, targets)?;

        for name in GRAD_CHECK_LOSSES {
            let eval = |p: &ModelParams| -> Result<LossEval> {
                match name {
                    "end" => end_loss(p, &batch, weights.lambda_l2),
                    "weighted_end" => weighted_end_loss(p, &batch, Some(&omega), weights.lambda_l2),
                    "recon" => recon_loss(p, &aux),
                    "activation" => activation_penalty(p, &batch),
                    _ => combined_loss(p, &batch, Some(&omega), Some(&aux), &weights),
                }
            };
            let analytic = eval(&params)?.flat_grad();
            let numeric = finite_diff_grad(|t| Ok(eval(&params.with_flat(t))?.value), &params.to_flat(), h)?;
            out.push(GradCheck {
                loss: name.to_string(),
                trial,
                relative_error: relative_error(&analytic, &numeric),
            });
        }
    }
    Ok(out)
}

/// Inputs to the two bound calculators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Margin.
    pub gamma: f64,
    pub sigma_spur: f64,
    /// Norm bound on the end-task (or transfer-task) head.
    pub eta: f64,
    /// L1 radius on the featurizer.
    pub tau: f64,
    /// Bound on the featurizer's spurious mass.
    pub lam: f64,
    pub d_c: usize,
    pub d_s: usize,
    /// Transfer-task test error, used only by the core-mass bound.
    pub eps_trans: f64,
}

/// The (non-positive) argument of Φ in [`worst_group_error_bound`].
pub fn worst_group_error_argument(b: &BoundInputs) -> Result<f64> {
    for (name, v) in [("gamma", b.gamma), ("sigma_spur", b.sigma_spur), ("eta", b.eta)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidInput(format!("{name} must be > 0, got {v}")));
        }
    }
    for (name, v) in [("tau", b.tau), ("lam", b.lam)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidInput(format!("{name} must be >= 0, got {v}")));
        }
    }
    let m = b.d_c as f64 * b.tau + b.d_s as f64 * b.lam;
    Ok(-(b.eta / (b.gamma * b.sigma_spur)) * (b.gamma * b.gamma + m * (m + 2.0 * b.gamma)).sqrt())
}

/// `Φ(−(η/(γσ)) · √(γ² + (d_c τ + d_s λ)(d_c τ + d_s λ + 2γ)))`.
pub fn worst_group_error_bound(b: &BoundInputs) -> Result<f64> {
    Ok(phi(worst_group_error_argument(b)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreMassBound {
    pub value: f64,
    /// The bound is negative and therefore says nothing.
    pub vacuous: bool,
}

/// `(√(σ² η² Φ⁻¹(ε)² + γ²) − d_s τ) / (d_c − d_s)`.
pub fn transfer_core_mass_lower_bound(b: &BoundInputs) -> Result<CoreMassBound> {
    if b.d_c <= b.d_s {
        return Err(Error::InvalidInput(format!("need d_c > d_s, got d_c = {}, d_s = {}", b.d_c, b.d_s)));
    }
    if !(b.eps_trans > 0.0 && b.eps_trans < 0.5) {
        return Err(Error::InvalidInput(format!("eps_trans must be in (0, 0.5), got {}", b.eps_trans)));
    }
    if !(b.gamma > 0.0) {
        return Err(Error::InvalidInput(format!("gamma must be > 0, got {}", b.gamma)));
    }
    let q = phi_inv(b.eps_trans)?;
    let s2 = b.sigma_spur * b.sigma_spur;
    let value = ((s2 * b.eta * b.eta * q * q + b.gamma * b.gamma).sqrt() - b.d_s as f64 * b.tau)
        / (b.d_c - b.d_s) as f64;
    Ok(CoreMassBound {
        value,
        vacuous: value < 0.0,
    })
}
