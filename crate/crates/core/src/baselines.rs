//! Trainer recipes: ERM, JTT, groupDRO, regularized multitask learning and
//! reconstruction-only training, all on top of [`optim::train_with`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalsel::{evaluate, GroupMetrics, SelectionStrategy};
use crate::linmodel::{end_logit_unchecked, predict_label, InitConfig, ModelParams};
use crate::objectives::{per_example_end_losses, recon_loss, weighted_end_loss, LossEval, LossWeights};
use crate::optim::{self, BatchObjective, OptimConfig, StandardObjective, TrainData, TrainRun, TrainTrace};
use crate::seeding;
use crate::synthgen::{
    make_balanced_test, noise_dataset, sample_group_dataset, AuxDataset, GroupDataSpec, LabeledDataset, NUM_GROUPS,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Erm,
    Jtt,
    GroupDro,
    RegMtl,
    AuxOnly,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Erm => "erm",
            Method::Jtt => "jtt",
            Method::GroupDro => "group_dro",
            Method::RegMtl => "reg_mtl",
            Method::AuxOnly => "aux_only",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything one run trains and evaluates on.
#[derive(Clone, Debug)]
pub struct TaskData {
    pub train: LabeledDataset,
    /// Reconstruction data; `None` when no auxiliary task is available.
    pub aux: Option<AuxDataset>,
    pub val: LabeledDataset,
    pub test: LabeledDataset,
}

impl TaskData {
    /// Sample train, validation and balanced test sets from `spec`. The
    /// validation set follows the training group mix; the auxiliary set is the
    /// training features with fresh noise.
    pub fn synthetic(spec: &GroupDataSpec, n_val: usize, n_test_per_group: usize, seed: u64) -> Result<Self> {
        let train = sample_group_dataset(spec, seeding::derive(seed, 1))?;
        let maj_frac = spec.n_maj as f64 / (spec.n_maj + spec.n_min) as f64;
        let val_maj = (n_val as f64 * maj_frac).round() as usize;
        let val = sample_group_dataset(&spec.with_counts(val_maj, n_val - val_maj), seeding::derive(seed, 2))?;
        let test = make_balanced_test(spec, n_test_per_group, seeding::derive(seed, 3))?;
        let aux = noise_dataset(&train, spec.sigma2_noise, seeding::derive(seed, 4))?;
        Ok(TaskData {
            train,
            aux: Some(aux),
            val,
            test,
        })
    }

    fn train_data(&self, with_aux: bool) -> TrainData<'_> {
        TrainData {
            end: &self.train,
            aux: if with_aux { self.aux.as_ref() } else { None },
            val: &self.val,
        }
    }
}

/// Settings shared by every trainer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerSetup {
    pub optim: OptimConfig,
    pub weights: LossWeights,
    /// L1 radius on the featurizer; `None` leaves it unconstrained.
    pub tau: Option<f64>,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub selector: SelectionStrategy,
}

impl TrainerSetup {
    fn init_params(&self, d: usize, seed: u64) -> Result<ModelParams> {
        ModelParams::init(d, self.tau, 1.0, &self.init, seed)
    }

    fn end_only_weights(&self) -> LossWeights {
        LossWeights {
            alpha_aux: 0.0,
            alpha_reg: 0.0,
            lambda_l2: self.weights.lambda_l2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JttConfig {
    /// Epochs of the identification (first-stage) run.
    pub id_epochs: usize,
    /// Weight on misclassified points in the second stage.
    pub upweight: f64,
}

impl Default for JttConfig {
    fn default() -> Self {
        JttConfig {
            id_epochs: 50,
            upweight: 5.0,
        }
    }
}

impl JttConfig {
    /// Default upweight with the identification run at 10% of `epochs`.
    pub fn for_epochs(epochs: usize) -> Self {
        JttConfig {
            id_epochs: (epochs / 10).max(1),
            ..JttConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.id_epochs == 0 {
            return Err(Error::InvalidInput("id_epochs must be >= 1".into()));
        }
        if !(self.upweight >= 1.0 && self.upweight.is_finite()) {
            return Err(Error::InvalidInput(format!("upweight must be >= 1, got {}", self.upweight)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupDroConfig {
    /// Exponentiated-gradient step size on the group weights.
    pub group_step: f64,
}

impl Default for GroupDroConfig {
    fn default() -> Self {
        GroupDroConfig { group_step: 0.01 }
    }
}

impl GroupDroConfig {
    pub fn validate(&self) -> Result<()> {
        // 0 is allowed: it freezes q at uniform.
        if !(self.group_step >= 0.0 && self.group_step.is_finite()) {
            return Err(Error::InvalidInput(format!("group_step must be >= 0, got {}", self.group_step)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JttStats {
    pub error_set_size: usize,
    pub error_set_group_counts: [usize; NUM_GROUPS],
    /// Set when the first-stage model made no training errors and the second
    /// stage fell back to plain ERM.
    pub fallback_to_erm: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupDroStats {
    pub final_q: [f64; NUM_GROUPS],
    /// Group weights after each epoch.
    pub q_per_epoch: Vec<[f64; NUM_GROUPS]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub method: Method,
    pub setup: TrainerSetup,
    /// 1-based epoch of the returned parameters.
    pub selected_epoch: usize,
    pub stop_epoch: usize,
    pub val: GroupMetrics,
    pub test: GroupMetrics,
    pub params: ModelParams,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub jtt: Option<JttStats>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub group_dro: Option<GroupDroStats>,
    #[serde(skip)]
    pub trace: TrainTrace,
}

fn finish(
    method: Method,
    setup: &TrainerSetup,
    data: &TaskData,
    run: TrainRun,
    use_last: bool,
) -> Result<FitResult> {
    let (params, selected_epoch) = if use_last {
        (run.last, run.trace.stop_epoch)
    } else {
        (run.best, run.best_epoch)
    };
    Ok(FitResult {
        method,
        setup: setup.clone(),
        selected_epoch,
        stop_epoch: run.trace.stop_epoch,
        val: run.trace.records[selected_epoch - 1].val.clone(),
        test: evaluate(&params, &data.test)?,
        params,
        jtt: None,
        group_dro: None,
        trace: run.trace,
    })
}

/// End-task training on the average loss. Auxiliary weights in `setup` are
/// ignored.
pub fn train_erm(data: &TaskData, setup: &TrainerSetup) -> Result<FitResult> {
    let init = setup.init_params(data.train.dim(), setup.optim.seed)?;
    let mut obj = StandardObjective {
        weights: setup.end_only_weights(),
    };
    let run = optim::train_with(init, data.train_data(false), &mut obj, &setup.optim, setup.selector)?;
    finish(Method::Erm, setup, data, run, false)
}

/// End-task loss with fixed per-example weights (indexed by training row).
#[derive(Clone, Debug)]
pub struct WeightedObjective {
    pub example_weights: Vec<f64>,
    pub lambda_l2: f64,
}

impl BatchObjective for WeightedObjective {
    fn batch_loss(
        &mut self,
        params: &ModelParams,
        end_batch: &LabeledDataset,
        end_idx: &[usize],
        _aux: Option<&AuxDataset>,
    ) -> Result<LossEval> {
        let w: Vec<f64> = end_idx.iter().map(|&i| self.example_weights[i]).collect();
        weighted_end_loss(params, end_batch, Some(&w), self.lambda_l2)
    }
}

/// Weights `upweight` on `errors`, 1 elsewhere, rescaled to mean 1.
pub fn jtt_weights(n: usize, errors: &[usize], upweight: f64) -> Vec<f64> {
    let mut w = vec![1.0; n];
    for &i in errors {
        w[i] = upweight;
    }
    let mean = w.iter().sum::<f64>() / n as f64;
    w.iter_mut().for_each(|v| *v /= mean);
    w
}

/// Two-stage JTT: a short ERM run identifies misclassified training points,
/// then a freshly initialised model is trained with those points upweighted.
pub fn train_jtt(data: &TaskData, setup: &TrainerSetup, jtt: &JttConfig) -> Result<FitResult> {
    jtt.validate()?;
    let d = data.train.dim();
    let end_weights = setup.end_only_weights();

    let stage1_cfg = OptimConfig {
        epochs: jtt.id_epochs,
        patience: 0,
        ..setup.optim.clone()
    };
    let mut obj = StandardObjective {
        weights: end_weights.clone(),
    };
    let stage1 = optim::train_with(
        setup.init_params(d, setup.optim.seed)?,
        data.train_data(false),
        &mut obj,
        &stage1_cfg,
        SelectionStrategy::NoGp,
    )?;
    let errors: Vec<usize> = data
        .train
        .features
        .outer_iter()
        .enumerate()
        .filter(|&(i, x)| predict_label(end_logit_unchecked(&stage1.last, x)) != data.train.labels[i])
        .map(|(i, _)| i)
        .collect();
    let mut counts = [0usize; NUM_GROUPS];
    for &i in &errors {
        counts[data.train.group_ids[i] as usize] += 1;
    }

    let stage2_seed = seeding::derive(setup.optim.seed, 0x4a54_5432);
    let stage2_cfg = OptimConfig {
        seed: stage2_seed,
        ..setup.optim.clone()
    };
    let init = setup.init_params(d, stage2_seed)?;
    let fallback = errors.is_empty();
    let run = if fallback {
        log::warn!("JTT first stage made no training errors; second stage is plain ERM");
        let mut obj = StandardObjective { weights: end_weights };
        optim::train_with(init, data.train_data(false), &mut obj, &stage2_cfg, setup.selector)?
    } else {
        let mut obj = WeightedObjective {
            example_weights: jtt_weights(data.train.len(), &errors, jtt.upweight),
            lambda_l2: setup.weights.lambda_l2,
        };
        optim::train_with(init, data.train_data(false), &mut obj, &stage2_cfg, setup.selector)?
    };
    let mut fit = finish(Method::Jtt, setup, data, run, false)?;
    fit.jtt = Some(JttStats {
        error_set_size: errors.len(),
        error_set_group_counts: counts,
        fallback_to_erm: fallback,
    });
    Ok(fit)
}

/// One logged groupDRO step: the weights after the update and the batch's
/// per-group mean losses (`None` for groups missing from the batch).
#[derive(Clone, Debug, PartialEq)]
pub struct DroStep {
    pub q: [f64; NUM_GROUPS],
    pub group_losses: [Option<f64>; NUM_GROUPS],
}

/// Online groupDRO: exponentiated-gradient ascent on group weights `q`,
/// descent on the `q`-weighted loss.
#[derive(Clone, Debug)]
pub struct GroupDroObjective {
    pub q: [f64; NUM_GROUPS],
    pub group_step: f64,
    pub lambda_l2: f64,
    pub log: Vec<DroStep>,
}

impl GroupDroObjective {
    pub fn new(group_step: f64, lambda_l2: f64) -> Self {
        GroupDroObjective {
            q: [1.0 / NUM_GROUPS as f64; NUM_GROUPS],
            group_step,
            lambda_l2,
            log: Vec::new(),
        }
    }
}

impl BatchObjective for GroupDroObjective {
    fn batch_loss(
        &mut self,
        params: &ModelParams,
        end_batch: &LabeledDataset,
        _end_idx: &[usize],
        _aux: Option<&AuxDataset>,
    ) -> Result<LossEval> {
        let losses = per_example_end_losses(params, end_batch);
        let mut sums = [0.0; NUM_GROUPS];
        let mut counts = [0usize; NUM_GROUPS];
        for (l, &g) in losses.iter().zip(&end_batch.group_ids) {
            sums[g as usize] += l;
            counts[g as usize] += 1;
        }
        let mut group_losses = [None; NUM_GROUPS];
        for g in 0..NUM_GROUPS {
            if counts[g] > 0 {
                let l = sums[g] / counts[g] as f64;
                group_losses[g] = Some(l);
                self.q[g] *= (self.group_step * l).exp();
            }
        }
        let total: f64 = self.q.iter().sum();
        self.q.iter_mut().for_each(|q| *q /= total);
        self.log.push(DroStep {
            q: self.q,
            group_losses,
        });

        // ω_i = B q_g / n_g turns the batch mean into Σ_g q_g ℓ_g.
        let b = end_batch.len() as f64;
        let w: Vec<f64> = end_batch
            .group_ids
            .iter()
            .map(|&g| b * self.q[g as usize] / counts[g as usize] as f64)
            .collect();
        weighted_end_loss(params, end_batch, Some(&w), self.lambda_l2)
    }
}

pub fn train_group_dro(data: &TaskData, setup: &TrainerSetup, dro: &GroupDroConfig) -> Result<FitResult> {
    dro.validate()?;
    let counts = data.train.group_counts();
    if let Some(g) = counts.iter().position(|&n| n == 0) {
        return Err(Error::InvalidInput(format!("group {g} has no training examples")));
    }
    let init = setup.init_params(data.train.dim(), setup.optim.seed)?;
    let mut obj = GroupDroObjective::new(dro.group_step, setup.weights.lambda_l2);
    let steps_per_epoch = data.train.len().div_ceil(setup.optim.batch_size);
    let run = optim::train_with(init, data.train_data(false), &mut obj, &setup.optim, setup.selector)?;
    let q_per_epoch = obj.log.chunks(steps_per_epoch).map(|c| c[c.len() - 1].q).collect();
    let mut fit = finish(Method::GroupDro, setup, data, run, false)?;
    fit.group_dro = Some(GroupDroStats {
        final_q: obj.q,
        q_per_epoch,
    });
    Ok(fit)
}

/// Joint end-task and reconstruction training under the L1 constraint on the
/// featurizer. With `alpha_aux = 0` the auxiliary stream is dropped entirely,
/// so the run is identical to ERM with the same setup.
pub fn train_reg_mtl(data: &TaskData, setup: &TrainerSetup) -> Result<FitResult> {
    let aux = data
        .aux
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("regularized multitask training needs auxiliary data".into()))?;
    if aux.is_empty() {
        return Err(Error::InvalidInput("auxiliary data is empty".into()));
    }
    setup.weights.validate()?;
    let init = setup.init_params(data.train.dim(), setup.optim.seed)?;
    let mut obj = StandardObjective {
        weights: setup.weights.clone(),
    };
    let with_aux = setup.weights.alpha_aux > 0.0;
    let run = optim::train_with(init, data.train_data(with_aux), &mut obj, &setup.optim, setup.selector)?;
    finish(Method::RegMtl, setup, data, run, false)
}

/// Reconstruction loss only; the end-task head is never trained.
#[derive(Clone, Copy, Debug, Default)]
pub struct ReconOnlyObjective;

impl BatchObjective for ReconOnlyObjective {
    fn batch_loss(
        &mut self,
        params: &ModelParams,
        _end_batch: &LabeledDataset,
        _end_idx: &[usize],
        aux: Option<&AuxDataset>,
    ) -> Result<LossEval> {
        recon_loss(params, aux.ok_or_else(|| Error::InvalidInput("missing auxiliary batch".into()))?)
    }
}

/// Featurizer trained on reconstruction alone. Returns the final parameters;
/// checkpoint selection on end-task accuracy would be meaningless here.
pub fn train_aux_only(data: &TaskData, setup: &TrainerSetup) -> Result<FitResult> {
    if data.aux.as_ref().is_none_or(|a| a.is_empty()) {
        return Err(Error::InvalidInput("auxiliary-only training needs auxiliary data".into()));
    }
    let init = setup.init_params(data.train.dim(), setup.optim.seed)?;
    let run = optim::train_with(
        init,
        data.train_data(true),
        &mut ReconOnlyObjective,
        &setup.optim,
        SelectionStrategy::NoGp,
    )?;
    finish(Method::AuxOnly, setup, data, run, true)
}

/// Method-specific settings used by [`fit`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MethodConfigs {
    pub jtt: Option<JttConfig>,
    pub group_dro: GroupDroConfig,
}

/// Dispatch on `method`. JTT without an explicit config uses
/// [`JttConfig::for_epochs`].
pub fn fit(method: Method, data: &TaskData, setup: &TrainerSetup, extra: &MethodConfigs) -> Result<FitResult> {
    match method {
        Method::Erm => train_erm(data, setup),
        Method::Jtt => {
            let jtt = extra.jtt.clone().unwrap_or_else(|| JttConfig::for_epochs(setup.optim.epochs));
            train_jtt(data, setup, &jtt)
        }
        Method::GroupDro => train_group_dro(data, setup, &extra.group_dro),
        Method::RegMtl => train_reg_mtl(data, setup),
        Method::AuxOnly => train_aux_only(data, setup),
    }
}
