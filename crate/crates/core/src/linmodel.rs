//! Two-layer linear multitask model.
//!
//! A diagonal featurizer `a` is shared by two heads: a scalar end-task head
//! `w_end` producing the logit `w_endᵀ(a ⊙ x)`, and a matrix reconstruction
//! head `W_aux` producing `W_auxᵀ(a ⊙ x̃)`. Capacity is controlled by an L1
//! radius on `a` and a fixed Frobenius norm on `W_aux`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "ParamsDoc", try_from = "ParamsDoc")]
pub struct ModelParams {
    pub a: Array1<f64>,
    pub w_end: Array1<f64>,
    pub w_aux: Array2<f64>,
    /// L1 radius on `a`; `None` leaves `a` unconstrained.
    pub tau: Option<f64>,
    pub fro_radius: f64,
}

/// How the auxiliary head is initialised.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxInit {
    /// `I · fro_radius / √d`: treats every input dimension identically.
    #[default]
    Identity,
    /// i.i.d. `N(0, 1)` entries, then rescaled to `fro_radius`.
    Gaussian,
}

/// Initialisation knobs. Defaults: `a = (τ/d)·1` (or all ones when
/// unconstrained), `w_end ~ N(0, 0.01²)`, identity auxiliary head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitConfig {
    pub w_end_std: f64,
    pub aux_head: AuxInit,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            w_end_std: 0.01,
            aux_head: AuxInit::Identity,
        }
    }
}

impl ModelParams {
    pub fn init(d: usize, tau: Option<f64>, fro_radius: f64, init: &InitConfig, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidSpec("model dimension must be at least 1".into()));
        }
        if let Some(t) = tau {
            if !(t > 0.0) {
                return Err(Error::InvalidSpec(format!("tau must be > 0, got {t}")));
            }
        }
        if !(fro_radius > 0.0 && fro_radius.is_finite()) {
            return Err(Error::InvalidSpec(format!("fro_radius must be > 0, got {fro_radius}")));
        }
        let mut rng = seeding::stream(seed, seeding::INIT);
        let a = match tau {
            Some(t) if t.is_finite() => Array1::from_elem(d, t / d as f64),
            _ => Array1::ones(d),
        };
        let w_end = if init.w_end_std > 0.0 {
            let n = Normal::new(0.0, init.w_end_std).map_err(|e| Error::InvalidSpec(e.to_string()))?;
            Array1::from_shape_fn(d, |_| n.sample(&mut rng))
        } else {
            Array1::zeros(d)
        };
        let w_aux = match init.aux_head {
            AuxInit::Identity => Array2::eye(d) * (fro_radius / (d as f64).sqrt()),
            AuxInit::Gaussian => {
                let n = Normal::new(0.0, 1.0).expect("unit normal");
                let raw = Array2::from_shape_fn((d, d), |_| n.sample(&mut rng));
                normalize_frobenius(raw.view(), fro_radius)?
            }
        };
        Ok(ModelParams {
            a,
            w_end,
            w_aux,
            tau,
            fro_radius,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// `w_end ⊙ a`, the equivalent single-layer weight vector.
    pub fn fused_weights(&self) -> Array1<f64> {
        &self.w_end * &self.a
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().chain(&self.w_end).chain(&self.w_aux).all(|v| v.is_finite())
    }

    /// Flatten as `[a, w_end, W_aux (row-major)]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.a
            .iter()
            .chain(&self.w_end)
            .chain(self.w_aux.iter())
            .copied()
            .collect()
    }

    /// Inverse of [`to_flat`](Self::to_flat), keeping this model's radii.
    pub fn with_flat(&self, flat: &[f64]) -> ModelParams {
        let d = self.dim();
        assert_eq!(flat.len(), 2 * d + d * d, "flat parameter length");
        ModelParams {
            a: Array1::from(flat[..d].to_vec()),
            w_end: Array1::from(flat[d..2 * d].to_vec()),
            w_aux: Array2::from_shape_vec((d, d), flat[2 * d..].to_vec()).expect("square"),
            tau: self.tau,
            fro_radius: self.fro_radius,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ParamsDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ParamsDoc = serde_json::from_str(text)?;
        doc.try_into()
    }
}

/// JSON document layout: `{a, w_end, W_aux, tau, fro_radius}`.
/// An unconstrained featurizer serialises `tau` as `null`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsDoc {
    a: Vec<f64>,
    w_end: Vec<f64>,
    #[serde(rename = "W_aux")]
    w_aux: Vec<Vec<f64>>,
    tau: Option<f64>,
    fro_radius: f64,
}

impl From<&ModelParams> for ParamsDoc {
    fn from(p: &ModelParams) -> Self {
        ParamsDoc {
            a: p.a.to_vec(),
            w_end: p.w_end.to_vec(),
            w_aux: p.w_aux.outer_iter().map(|r| r.to_vec()).collect(),
            tau: p.tau.filter(|t| t.is_finite()),
            fro_radius: p.fro_radius,
        }
    }
}

impl From<ModelParams> for ParamsDoc {
    fn from(p: ModelParams) -> Self {
        ParamsDoc::from(&p)
    }
}

impl TryFrom<ParamsDoc> for ModelParams {
    type Error = Error;

    fn try_from(doc: ParamsDoc) -> Result<Self> {
        let d = doc.a.len();
        if doc.w_end.len() != d || doc.w_aux.len() != d || doc.w_aux.iter().any(|r| r.len() != d) {
            return Err(Error::Shape(format!("params document is not consistent with d = {d}")));
        }
        let flat: Vec<f64> = doc.w_aux.into_iter().flatten().collect();
        Ok(ModelParams {
            a: Array1::from(doc.a),
            w_end: Array1::from(doc.w_end),
            w_aux: Array2::from_shape_vec((d, d), flat).map_err(|e| Error::Shape(e.to_string()))?,
            tau: doc.tau,
            fro_radius: doc.fro_radius,
        })
    }
}

fn check_len(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Shape(format!("{what}: expected length {expected}, got {got}")));
    }
    Ok(())
}

pub fn featurize(a: ArrayView1<f64>, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    check_len("featurize", a.len(), x.len())?;
    Ok(&a * &x)
}

/// End-task logit. The predicted label is `sign(logit)` with `sign(0) = +1`.
pub fn predict_end(params: &ModelParams, x: ArrayView1<f64>) -> Result<f64> {
    check_len("predict_end", params.dim(), x.len())?;
    Ok(end_logit_unchecked(params, x))
}

pub(crate) fn end_logit_unchecked(params: &ModelParams, x: ArrayView1<f64>) -> f64 {
    params
        .w_end
        .iter()
        .zip(&params.a)
        .zip(x)
        .map(|((w, a), x)| w * (a * x))
        .sum()
}

/// Logits for every row of `features`.
pub fn end_logits(params: &ModelParams, features: ArrayView2<f64>) -> Result<Array1<f64>> {
    check_len("end_logits", params.dim(), features.ncols())?;
    Ok(features.outer_iter().map(|x| end_logit_unchecked(params, x)).collect())
}

pub fn predict_label(logit: f64) -> i8 {
    if logit >= 0.0 {
        1
    } else {
        -1
    }
}

/// Reconstruction `W_auxᵀ(a ⊙ x̃)`.
pub fn predict_aux(params: &ModelParams, x_tilde: ArrayView1<f64>) -> Result<Array1<f64>> {
    check_len("predict_aux", params.dim(), x_tilde.len())?;
    let h = &params.a * &x_tilde;
    Ok(params.w_aux.t().dot(&h))
}

/// Euclidean projection onto `{u : ‖u‖₁ ≤ tau}` by sorting magnitudes and
/// soft-thresholding at the resulting level.
pub fn project_l1(v: ArrayView1<f64>, tau: f64) -> Result<Array1<f64>> {
    if !(tau > 0.0) {
        return Err(Error::InvalidSpec(format!("L1 radius must be > 0, got {tau}")));
    }
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= tau {
        return Ok(v.to_owned());
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &m) in mags.iter().enumerate() {
        cumsum += m;
        let t = (cumsum - tau) / (k + 1) as f64;
        if m > t {
            theta = t;
        } else {
            break;
        }
    }
    Ok(v.mapv(|x| x.signum() * (x.abs() - theta).max(0.0)))
}

/// Project onto the ball, then push interior points radially out to the
/// sphere `‖u‖₁ = tau`. A zero vector maps to `(tau/d)·1`.
pub fn project_l1_sphere(v: ArrayView1<f64>, tau: f64) -> Result<Array1<f64>> {
    let u = project_l1(v, tau)?;
    let l1: f64 = u.iter().map(|x| x.abs()).sum();
    if l1 == 0.0 {
        return Ok(Array1::from_elem(u.len(), tau / u.len() as f64));
    }
    if l1 < tau {
        return Ok(u * (tau / l1));
    }
    Ok(u)
}

pub fn normalize_frobenius(w: ArrayView2<f64>, radius: f64) -> Result<Array2<f64>> {
    if !(radius > 0.0) {
        return Err(Error::InvalidSpec(format!("Frobenius radius must be > 0, got {radius}")));
    }
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Degenerate(format!("cannot rescale a matrix with Frobenius norm {norm}")));
    }
    Ok(w.mapv(|x| x * (radius / norm)))
}

pub fn l1_norm(v: ArrayView1<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn frobenius_norm(w: ArrayView2<f64>) -> f64 {
    w.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn params(a: Array1<f64>, w_end: Array1<f64>, w_aux: Array2<f64>) -> ModelParams {
        ModelParams {
            a,
            w_end,
            w_aux,
            tau: None,
            fro_radius: 1.0,
        }
    }

    #[test]
    fn featurize_cases() {
        let x = array![2.0, -2.0];
        assert_eq!(featurize(array![1.0, 1.0].view(), x.view()).unwrap(), x);
        assert_eq!(featurize(array![0.0, 0.0].view(), x.view()).unwrap(), array![0.0, 0.0]);
        let out = featurize(array![0.05, 0.05].view(), x.view()).unwrap();
        assert_abs_diff_eq!(out[0], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], -0.1, epsilon = 1e-15);
        assert!(featurize(array![1.0].view(), x.view()).is_err());
    }

    #[test]
    fn predict_end_cases() {
        let p = params(array![1.0, 1.0], array![1.0, 0.0], Array2::eye(2));
        assert_eq!(predict_end(&p, array![3.0, 7.0].view()).unwrap(), 3.0);
        let z = params(array![1.0, 1.0], array![0.0, 0.0], Array2::eye(2));
        let logit = predict_end(&z, array![3.0, 7.0].view()).unwrap();
        assert_eq!(logit, 0.0);
        assert_eq!(predict_label(logit), 1);
        assert!(predict_end(&p, array![1.0].view()).is_err());
    }

    #[test]
    fn predict_aux_cases() {
        let x = array![0.3, -1.7];
        let id = params(array![1.0, 1.0], array![0.0, 0.0], Array2::eye(2));
        assert_eq!(predict_aux(&id, x.view()).unwrap(), x);
        let w = array![[0.3, -2.0], [1.5, 0.7]];
        let zero = params(array![0.0, 0.0], array![0.0, 0.0], w.clone());
        assert_eq!(predict_aux(&zero, x.view()).unwrap(), array![0.0, 0.0]);

        // triple-loop oracle: out_j = Σ_i W_ij a_i x_i
        let a = array![0.4, -1.1];
        let p = params(a.clone(), array![0.0, 0.0], w.clone());
        let out = predict_aux(&p, x.view()).unwrap();
        for j in 0..2 {
            let mut acc = 0.0;
            for i in 0..2 {
                acc += w[[i, j]] * a[i] * x[i];
            }
            assert_abs_diff_eq!(out[j], acc, epsilon = 1e-15);
        }
    }

    #[test]
    fn project_l1_cases() {
        let inside = array![0.5, -0.2];
        assert_eq!(project_l1(inside.view(), 1.0).unwrap(), inside);
        let p = project_l1(array![3.0, 4.0].view(), 1.0).unwrap();
        assert_abs_diff_eq!(p[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 1.0, epsilon = 1e-12);
        let q = project_l1(array![-2.0, 2.0].view(), 2.0).unwrap();
        assert_abs_diff_eq!(q[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q[1], 1.0, epsilon = 1e-12);
        assert!(project_l1(inside.view(), 0.0).is_err());
        assert!(project_l1(inside.view(), -1.0).is_err());
    }

    #[test]
    fn sphere_projection_reaches_the_boundary() {
        let u = project_l1_sphere(array![0.01, 0.02].view(), 0.1).unwrap();
        assert_abs_diff_eq!(l1_norm(u.view()), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(u[1] / u[0], 2.0, epsilon = 1e-12);
        let z = project_l1_sphere(array![0.0, 0.0].view(), 10.0).unwrap();
        assert_eq!(z, array![5.0, 5.0]);
    }

    #[test]
    fn normalize_frobenius_cases() {
        let w = array![[0.6, 0.0], [0.0, 0.8]];
        assert_eq!(normalize_frobenius(w.view(), 1.0).unwrap(), w);
        let id = normalize_frobenius(Array2::<f64>::eye(2).view(), 1.0).unwrap();
        assert_abs_diff_eq!(id[[0, 0]], 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(id[[1, 1]], 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert!(matches!(
            normalize_frobenius(Array2::<f64>::zeros((2, 2)).view(), 1.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn init_is_feasible_and_seeded() {
        let cfg = InitConfig::default();
        let p = ModelParams::init(2, Some(0.1), 1.0, &cfg, 3).unwrap();
        assert_eq!(p.a, array![0.05, 0.05]);
        assert_abs_diff_eq!(frobenius_norm(p.w_aux.view()), 1.0, epsilon = 1e-12);
        assert_eq!(p, ModelParams::init(2, Some(0.1), 1.0, &cfg, 3).unwrap());
        let g = InitConfig {
            aux_head: AuxInit::Gaussian,
            ..cfg.clone()
        };
        let pg = ModelParams::init(3, None, 1.0, &g, 3).unwrap();
        assert_eq!(pg.a, Array1::<f64>::ones(3));
        assert_abs_diff_eq!(frobenius_norm(pg.w_aux.view()), 1.0, epsilon = 1e-12);
        assert!(ModelParams::init(2, Some(0.0), 1.0, &cfg, 0).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let g = InitConfig {
            aux_head: AuxInit::Gaussian,
            ..InitConfig::default()
        };
        let mut p = ModelParams::init(3, Some(0.1), 1.0, &g, 17).unwrap();
        p.a[1] = 1.0 / 3.0;
        let text = p.to_json().unwrap();
        assert!(text.contains("\"W_aux\""));
        let back = ModelParams::from_json(&text).unwrap();
        assert_eq!(back.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   p.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(back, p);

        let free = ModelParams { tau: None, ..p };
        assert!(free.to_json().unwrap().contains("\"tau\": null"));
        assert_eq!(ModelParams::from_json(&free.to_json().unwrap()).unwrap(), free);
    }
}
