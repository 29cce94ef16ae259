//! Losses and their closed-form gradients.
//!
//! * end task: logistic loss (binary cross-entropy with targets `(y+1)/2`)
//!   plus `(λ/2)‖w_end‖²`
//! * reconstruction: `(1/2B) Σ ‖x − W_auxᵀ(a ⊙ x̃)‖²`
//! * activation penalty: L1 of the shared activations `a ⊙ x`, averaged over
//!   the batch and divided by `d`. Both heads read the same activations here,
//!   so the end and auxiliary terms coincide and the penalty is counted twice.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linmodel::{end_logit_unchecked, ModelParams};
use crate::synthgen::{AuxDataset, LabeledDataset};

#[derive(Clone, Debug, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub grad_a: Array1<f64>,
    pub grad_w_end: Array1<f64>,
    pub grad_w_aux: Array2<f64>,
}

impl LossEval {
    pub fn zeros(d: usize) -> Self {
        LossEval {
            value: 0.0,
            grad_a: Array1::zeros(d),
            grad_w_end: Array1::zeros(d),
            grad_w_aux: Array2::zeros((d, d)),
        }
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &LossEval, scale: f64) {
        self.value += scale * other.value;
        self.grad_a.scaled_add(scale, &other.grad_a);
        self.grad_w_end.scaled_add(scale, &other.grad_w_end);
        self.grad_w_aux.scaled_add(scale, &other.grad_w_aux);
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self
                .grad_a
                .iter()
                .chain(&self.grad_w_end)
                .chain(&self.grad_w_aux)
                .all(|g| g.is_finite())
    }

    /// Gradient flattened in [`ModelParams::to_flat`] order.
    pub fn flat_grad(&self) -> Vec<f64> {
        self.grad_a
            .iter()
            .chain(&self.grad_w_end)
            .chain(self.grad_w_aux.iter())
            .copied()
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    /// Weight on the reconstruction loss.
    pub alpha_aux: f64,
    /// Weight on the L1 activation penalty.
    pub alpha_reg: f64,
    /// L2 coefficient on `w_end`.
    pub lambda_l2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha_aux: 0.0,
            alpha_reg: 0.0,
            lambda_l2: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha_aux", self.alpha_aux),
            ("alpha_reg", self.alpha_reg),
            ("lambda_l2", self.lambda_l2),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// `log(1 + e^u)` without overflow.
fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Per-example logistic losses `log(1 + exp(−y z))`.
pub fn per_example_end_losses(params: &ModelParams, batch: &LabeledDataset) -> Vec<f64> {
    batch
        .features
        .outer_iter()
        .zip(&batch.labels)
        .map(|(x, &y)| softplus(-f64::from(y) * end_logit_unchecked(params, x)))
        .collect()
}

fn check_dims(params: &ModelParams, d: usize) -> Result<()> {
    if params.dim() != d {
        return Err(Error::Shape(format!("model has d = {}, batch has d = {d}", params.dim())));
    }
    Ok(())
}

pub fn end_loss(params: &ModelParams, batch: &LabeledDataset, lambda_l2: f64) -> Result<LossEval> {
    weighted_end_loss(params, batch, None, lambda_l2)
}

/// `(1/B) Σ ω_i ℓ_i + (λ/2)‖w_end‖²`. With `example_weights = None` every
/// `ω_i = 1`.
pub fn weighted_end_loss(
    params: &ModelParams,
    batch: &LabeledDataset,
    example_weights: Option<&[f64]>,
    lambda_l2: f64,
) -> Result<LossEval> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("end-task batch is empty".into()));
    }
    check_dims(params, batch.dim())?;
    if let Some(w) = example_weights {
        if w.len() != batch.len() {
            return Err(Error::Shape(format!("{} weights for {} examples", w.len(), batch.len())));
        }
    }
    let d = params.dim();
    let inv_b = 1.0 / batch.len() as f64;
    let mut out = LossEval::zeros(d);
    for (i, x) in batch.features.outer_iter().enumerate() {
        let y = f64::from(batch.labels[i]);
        let omega = example_weights.map_or(1.0, |w| w[i]);
        let z = end_logit_unchecked(params, x);
        let t = 0.5 * (y + 1.0);
        // d/dz log(1 + e^{-yz}) = σ(z) − t
        let r = omega * inv_b * (sigmoid(z) - t);
        out.value += omega * inv_b * softplus(-y * z);
        for j in 0..d {
            out.grad_w_end[j] += r * params.a[j] * x[j];
            out.grad_a[j] += r * params.w_end[j] * x[j];
        }
    }
    out.value += 0.5 * lambda_l2 * params.w_end.dot(&params.w_end);
    out.grad_w_end.scaled_add(lambda_l2, &params.w_end);
    Ok(out)
}

pub fn recon_loss(params: &ModelParams, batch: &AuxDataset) -> Result<LossEval> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("auxiliary batch is empty".into()));
    }
    check_dims(params, batch.dim())?;
    let d = params.dim();
    let inv_b = 1.0 / batch.len() as f64;
    let mut out = LossEval::zeros(d);
    for (xt, x) in batch.noised.outer_iter().zip(batch.targets.outer_iter()) {
        let h = &params.a * &xt;
        let e = params.w_aux.t().dot(&h) - x;
        out.value += 0.5 * inv_b * e.dot(&e);
        let we = params.w_aux.dot(&e);
        for i in 0..d {
            out.grad_a[i] += inv_b * we[i] * xt[i];
            for j in 0..d {
                out.grad_w_aux[[i, j]] += inv_b * h[i] * e[j];
            }
        }
    }
    Ok(out)
}

/// `2 · mean_i ‖a ⊙ x_i‖₁ / d` with subgradient 0 wherever `a_j x_ij = 0`.
pub fn activation_penalty(params: &ModelParams, batch: &LabeledDataset) -> Result<LossEval> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("end-task batch is empty".into()));
    }
    check_dims(params, batch.dim())?;
    let d = params.dim();
    let scale = 2.0 / (batch.len() as f64 * d as f64);
    let mut out = LossEval::zeros(d);
    for x in batch.features.outer_iter() {
        for j in 0..d {
            let h = params.a[j] * x[j];
            out.value += scale * h.abs();
            if h != 0.0 {
                out.grad_a[j] += scale * h.signum() * x[j];
            }
        }
    }
    Ok(out)
}

/// End loss (optionally example-weighted) plus the weighted auxiliary and
/// activation terms. `aux = None` drops the reconstruction term.
pub fn combined_loss(
    params: &ModelParams,
    end_batch: &LabeledDataset,
    example_weights: Option<&[f64]>,
    aux_batch: Option<&AuxDataset>,
    weights: &LossWeights,
) -> Result<LossEval> {
    weights.validate()?;
    let mut total = weighted_end_loss(params, end_batch, example_weights, weights.lambda_l2)?;
    if let Some(aux) = aux_batch {
        if weights.alpha_aux > 0.0 {
            total.add_scaled(&recon_loss(params, aux)?, weights.alpha_aux);
        }
    }
    if weights.alpha_reg > 0.0 {
        total.add_scaled(&activation_penalty(params, end_batch)?, weights.alpha_reg);
    }
    Ok(total)
}

/// `end + α_aux · recon + α_reg · activation penalty`.
pub fn multitask_loss(
    params: &ModelParams,
    end_batch: &LabeledDataset,
    aux_batch: &AuxDataset,
    weights: &LossWeights,
) -> Result<LossEval> {
    if aux_batch.is_empty() {
        return Err(Error::InvalidInput("auxiliary batch is empty".into()));
    }
    combined_loss(params, end_batch, None, Some(aux_batch), weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn model(a: Array1<f64>, w_end: Array1<f64>, w_aux: Array2<f64>) -> ModelParams {
        ModelParams {
            a,
            w_end,
            w_aux,
            tau: None,
            fro_radius: 1.0,
        }
    }

    fn one_point(x: Array1<f64>, y: i8) -> LabeledDataset {
        let d = x.len();
        LabeledDataset::new(x.into_shape_with_order((1, d)).unwrap(), vec![y], vec![y]).unwrap()
    }

    #[test]
    fn zero_logit_gives_ln2() {
        let p = model(array![1.0, 1.0], array![0.0, 0.0], Array2::eye(2));
        let batch = LabeledDataset::new(
            array![[1.0, 2.0], [-3.0, 0.5], [0.1, 0.1]],
            vec![1, -1, 1],
            vec![1, 1, -1],
        )
        .unwrap();
        let e = end_loss(&p, &batch, 0.0).unwrap();
        assert_abs_diff_eq!(e.value, std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn single_point_logit_two() {
        let p = model(array![1.0], array![2.0], Array2::eye(1));
        let e = end_loss(&p, &one_point(array![1.0], 1), 0.0).unwrap();
        let expected = (1.0 + (-2.0f64).exp()).ln();
        assert_abs_diff_eq!(e.value, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(e.value, 0.1269, epsilon = 1e-4);
    }

    #[test]
    fn logistic_loss_is_stable_for_large_logits() {
        let p = model(array![1.0], array![50.0], Array2::eye(1));
        let right = end_loss(&p, &one_point(array![1.0], 1), 0.0).unwrap();
        let wrong = end_loss(&p, &one_point(array![1.0], -1), 0.0).unwrap();
        assert!(right.value > 0.0 && right.value < 1e-20);
        assert_abs_diff_eq!(wrong.value, 50.0, epsilon = 1e-12);
        assert!(right.is_finite() && wrong.is_finite());
    }

    #[test]
    fn recon_scalar_cases() {
        let aux = AuxDataset::new(array![[1.0]], array![[1.0]]).unwrap();
        let exact = model(array![0.5], array![0.0], array![[2.0]]);
        assert_abs_diff_eq!(recon_loss(&exact, &aux).unwrap().value, 0.0, epsilon = 1e-15);
        let half = model(array![0.5], array![0.0], array![[1.0]]);
        assert_abs_diff_eq!(recon_loss(&half, &aux).unwrap().value, 0.125, epsilon = 1e-15);
    }

    #[test]
    fn identity_reconstruction_is_free() {
        let x = array![[0.3, -1.0], [2.0, 0.5]];
        let aux = AuxDataset::new(x.clone(), x).unwrap();
        let p = model(array![1.0, 1.0], array![0.0, 0.0], Array2::eye(2));
        let r = recon_loss(&p, &aux).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.grad_a.iter().chain(r.grad_w_aux.iter()).all(|g| *g == 0.0));
    }

    #[test]
    fn empty_batches_and_bad_weights_error() {
        let p = model(array![1.0, 1.0], array![0.0, 0.0], Array2::eye(2));
        let empty = LabeledDataset::new(Array2::zeros((0, 2)), vec![], vec![]).unwrap();
        assert!(end_loss(&p, &empty, 1.0).is_err());
        let empty_aux = AuxDataset::new(Array2::zeros((0, 2)), Array2::zeros((0, 2))).unwrap();
        assert!(recon_loss(&p, &empty_aux).is_err());
        let batch = one_point(array![1.0, 1.0], 1);
        let w = LossWeights {
            alpha_aux: -1.0,
            ..LossWeights::default()
        };
        let aux = AuxDataset::new(array![[1.0, 1.0]], array![[1.0, 1.0]]).unwrap();
        assert!(multitask_loss(&p, &batch, &aux, &w).is_err());
    }

    #[test]
    fn zero_weights_reduce_to_end_loss() {
        let p = model(array![0.3, -0.2], array![0.7, 1.1], array![[0.5, 0.5], [0.5, -0.5]]);
        let batch = LabeledDataset::new(array![[1.0, 2.0], [-3.0, 0.5]], vec![1, -1], vec![1, 1]).unwrap();
        let aux = AuxDataset::new(array![[1.2, 0.0], [0.1, -0.4]], array![[1.0, 2.0], [-3.0, 0.5]]).unwrap();
        let w = LossWeights {
            alpha_aux: 0.0,
            alpha_reg: 0.0,
            lambda_l2: 0.5,
        };
        assert_eq!(multitask_loss(&p, &batch, &aux, &w).unwrap(), end_loss(&p, &batch, 0.5).unwrap());
    }
}
