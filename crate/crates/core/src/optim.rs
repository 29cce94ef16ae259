//! Projected minibatch SGD, heterogeneous task batching and the epoch loop.

use std::io::Write;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalsel::{evaluate, GroupMetrics, SelectionStrategy, IMPROVEMENT_EPS};
use crate::linmodel::{frobenius_norm, l1_norm, normalize_frobenius, project_l1, project_l1_sphere, ModelParams};
use crate::objectives::{combined_loss, LossEval, LossWeights};
use crate::seeding;
use crate::synthgen::{AuxDataset, LabeledDataset};

/// How `a` is brought back to the constraint set after a step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// Euclidean projection onto `‖a‖₁ ≤ τ`.
    #[default]
    Ball,
    /// Ball projection followed by rescaling onto `‖a‖₁ = τ`.
    Sphere,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs without improvement before stopping; 0 disables early stopping.
    #[serde(default)]
    pub patience: usize,
    #[serde(default)]
    pub momentum: f64,
    pub seed: u64,
    #[serde(default)]
    pub projection: Projection,
    /// Keep a parameter snapshot in every trace record.
    #[serde(default)]
    pub keep_snapshots: bool,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 500,
            patience: 0,
            momentum: 0.0,
            seed: 0,
            projection: Projection::Ball,
            keep_snapshots: false,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidInput("batch_size must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidInput("epochs must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidInput(format!("momentum must be in [0, 1), got {}", self.momentum)));
        }
        Ok(())
    }
}

/// Velocity buffers for heavy-ball momentum.
#[derive(Clone, Debug, Default)]
pub struct MomentumState {
    velocity: Option<(Array1<f64>, Array1<f64>, Array2<f64>)>,
}

/// One projected step. `epoch` only labels a divergence error.
pub fn sgd_step(
    params: &mut ModelParams,
    grads: &LossEval,
    cfg: &OptimConfig,
    state: &mut MomentumState,
    epoch: usize,
) -> Result<()> {
    let d = params.dim();
    if grads.grad_a.len() != d || grads.grad_w_end.len() != d || grads.grad_w_aux.dim() != (d, d) {
        return Err(Error::Shape(format!("gradient shapes do not match a model with d = {d}")));
    }
    if !grads.is_finite() {
        return Err(Error::Diverged {
            epoch,
            detail: "non-finite gradient".into(),
        });
    }
    let (va, vw, vaux) = state.velocity.get_or_insert_with(|| {
        (Array1::zeros(d), Array1::zeros(d), Array2::zeros((d, d)))
    });
    let mu = cfg.momentum;
    *va = &*va * mu + &grads.grad_a;
    *vw = &*vw * mu + &grads.grad_w_end;
    *vaux = &*vaux * mu + &grads.grad_w_aux;

    params.a.scaled_add(-cfg.learning_rate, va);
    params.w_end.scaled_add(-cfg.learning_rate, vw);
    params.w_aux.scaled_add(-cfg.learning_rate, vaux);

    if let Some(tau) = params.tau.filter(|t| t.is_finite()) {
        params.a = match cfg.projection {
            Projection::Ball => project_l1(params.a.view(), tau)?,
            Projection::Sphere => project_l1_sphere(params.a.view(), tau)?,
        };
    }
    params.w_aux = normalize_frobenius(params.w_aux.view(), params.fro_radius).map_err(|e| Error::Diverged {
        epoch,
        detail: format!("auxiliary head collapsed: {e}"),
    })?;
    if !params.is_finite() {
        return Err(Error::Diverged {
            epoch,
            detail: "non-finite parameters after step".into(),
        });
    }
    if cfg!(debug_assertions) {
        check_feasible(params);
    }
    Ok(())
}

fn check_feasible(params: &ModelParams) {
    if let Some(tau) = params.tau.filter(|t| t.is_finite()) {
        let n = l1_norm(params.a.view());
        assert!(n <= tau * (1.0 + 1e-9) + 1e-12, "‖a‖₁ = {n} exceeds τ = {tau}");
    }
    let f = frobenius_norm(params.w_aux.view());
    assert!((f - params.fro_radius).abs() <= 1e-9 * params.fro_radius.max(1.0), "‖W_aux‖_F = {f}");
}

/// Index batches for one epoch. The epoch has `ceil(max(n_end, n_aux) / batch)` pairs and the shorter stream
/// restarts on a fresh permutation when it runs out. Every batch has
/// `batch_size` entries except possibly the last, and paired batches have
/// equal length.
pub fn batch_indices(
    n_end: usize,
    n_aux: Option<usize>,
    batch_size: usize,
    epoch_seed: u64,
) -> Result<Vec<(Vec<usize>, Option<Vec<usize>>)>> {
    if n_end == 0 || n_aux == Some(0) {
        return Err(Error::InvalidInput("cannot batch an empty dataset".into()));
    }
    if batch_size == 0 {
        return Err(Error::InvalidInput("batch_size must be >= 1".into()));
    }
    let total = n_end.max(n_aux.unwrap_or(0));
    let n_pairs = total.div_ceil(batch_size);
    let mut end_stream = Cycler::new(n_end, seeding::stream(epoch_seed, seeding::END_SHUFFLE));
    let mut aux_stream = n_aux.map(|n| Cycler::new(n, seeding::stream(epoch_seed, seeding::AUX_SHUFFLE)));
    let mut out = Vec::with_capacity(n_pairs);
    for k in 0..n_pairs {
        let len = batch_size.min(total - k * batch_size);
        let end = end_stream.take(len);
        let aux = aux_stream.as_mut().map(|s| s.take(len));
        out.push((end, aux));
    }
    Ok(out)
}

/// Endless sequence of permutations of `0..n`.
struct Cycler {
    rng: ChaCha8Rng,
    perm: Vec<usize>,
    pos: usize,
}

impl Cycler {
    fn new(n: usize, mut rng: ChaCha8Rng) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        Cycler { rng, perm, pos: 0 }
    }

    fn take(&mut self, len: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(len);
        while out.len() < len {
            if self.pos == self.perm.len() {
                self.perm.shuffle(&mut self.rng);
                self.pos = 0;
            }
            out.push(self.perm[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// Seed for the shuffles of one epoch.
pub fn epoch_seed(run_seed: u64, epoch: usize) -> u64 {
    seeding::derive(run_seed, 0x5348_5546 ^ epoch as u64)
}

/// Materialised batches for one epoch (epoch 0 of `seed`).
pub fn heterogeneous_batches(
    end_data: &LabeledDataset,
    aux_data: &AuxDataset,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<(LabeledDataset, AuxDataset)>> {
    Ok(batch_indices(end_data.len(), Some(aux_data.len()), batch_size, epoch_seed(seed, 0))?
        .into_iter()
        .map(|(e, a)| (end_data.select(&e), aux_data.select(&a.expect("aux indices"))))
        .collect())
}

/// Something that turns a batch into a loss and gradient. `end_idx` indexes
/// the full end-task training set so objectives can carry per-example state.
pub trait BatchObjective {
    fn batch_loss(
        &mut self,
        params: &ModelParams,
        end_batch: &LabeledDataset,
        end_idx: &[usize],
        aux_batch: Option<&AuxDataset>,
    ) -> Result<LossEval>;
}

/// The plain weighted sum of end, reconstruction and activation losses.
#[derive(Clone, Debug)]
pub struct StandardObjective {
    pub weights: LossWeights,
}

impl BatchObjective for StandardObjective {
    fn batch_loss(
        &mut self,
        params: &ModelParams,
        end_batch: &LabeledDataset,
        _end_idx: &[usize],
        aux_batch: Option<&AuxDataset>,
    ) -> Result<LossEval> {
        combined_loss(params, end_batch, None, aux_batch, &self.weights)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based count of completed epochs.
    pub epoch: usize,
    /// Mean minibatch objective over the epoch.
    pub train_loss: f64,
    pub val: GroupMetrics,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub params: Option<ModelParams>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<EpochRecord>,
    pub stop_epoch: usize,
}

impl TrainTrace {
    /// `epoch,train_loss,val_avg_acc,val_wg_acc,g0,g1,g2,g3`
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["epoch", "train_loss", "val_avg_acc", "val_wg_acc", "g0", "g1", "g2", "g3"])?;
        for r in &self.records {
            let mut row = vec![
                r.epoch.to_string(),
                format!("{:?}", r.train_loss),
                format!("{:?}", r.val.avg_acc),
                format!("{:?}", r.val.wg_acc),
            ];
            row.extend(r.val.per_group_acc.iter().map(|a| a.map_or_else(String::new, |v| format!("{v:?}"))));
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Training data for one run. `aux = None` trains the end task alone.
#[derive(Clone, Copy, Debug)]
pub struct TrainData<'a> {
    pub end: &'a LabeledDataset,
    pub aux: Option<&'a AuxDataset>,
    pub val: &'a LabeledDataset,
}

/// Standard training with [`StandardObjective`].
pub fn train(
    params: ModelParams,
    end_data: &LabeledDataset,
    aux_data: Option<&AuxDataset>,
    weights: &LossWeights,
    cfg: &OptimConfig,
    val_data: &LabeledDataset,
    selector: SelectionStrategy,
) -> Result<(TrainTrace, ModelParams)> {
    weights.validate()?;
    let mut obj = StandardObjective {
        weights: weights.clone(),
    };
    let run = train_with(
        params,
        TrainData {
            end: end_data,
            aux: aux_data,
            val: val_data,
        },
        &mut obj,
        cfg,
        selector,
    )?;
    Ok((run.trace, run.best))
}

/// Output of [`train_with`].
#[derive(Clone, Debug)]
pub struct TrainRun {
    pub trace: TrainTrace,
    /// Parameters at the selected epoch.
    pub best: ModelParams,
    /// 1-based epoch of `best`.
    pub best_epoch: usize,
    /// Parameters after the final epoch.
    pub last: ModelParams,
}

/// Epoch loop shared by every trainer: shuffle, step on each batch, evaluate
/// on validation after the last step, keep the best checkpoint.
pub fn train_with(
    mut params: ModelParams,
    data: TrainData<'_>,
    objective: &mut dyn BatchObjective,
    cfg: &OptimConfig,
    selector: SelectionStrategy,
) -> Result<TrainRun> {
    cfg.validate()?;
    if data.val.is_empty() {
        return Err(Error::InvalidInput("validation set is empty".into()));
    }
    if data.end.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    if data.end.dim() != params.dim() || data.val.dim() != params.dim() {
        return Err(Error::Shape("data dimension does not match the model".into()));
    }
    if let Some(aux) = data.aux {
        if aux.dim() != params.dim() {
            return Err(Error::Shape("auxiliary data dimension does not match the model".into()));
        }
    }
    if selector == SelectionStrategy::ValGp && data.val.group_counts().contains(&0) {
        return Err(Error::InvalidInput(
            "worst-group selection needs validation examples from every group".into(),
        ));
    }

    let mut state = MomentumState::default();
    let mut trace = TrainTrace::default();
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut since_improvement = 0;

    for epoch in 1..=cfg.epochs {
        let batches = batch_indices(
            data.end.len(),
            data.aux.map(|a| a.len()),
            cfg.batch_size,
            epoch_seed(cfg.seed, epoch),
        )?;
        let mut loss_sum = 0.0;
        for (end_idx, aux_idx) in &batches {
            let end_batch = data.end.select(end_idx);
            let aux_batch = match (data.aux, aux_idx) {
                (Some(aux), Some(idx)) => Some(aux.select(idx)),
                _ => None,
            };
            let eval = objective.batch_loss(&params, &end_batch, end_idx, aux_batch.as_ref())?;
            if !eval.value.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: format!("training loss is {}", eval.value),
                });
            }
            loss_sum += eval.value;
            sgd_step(&mut params, &eval, cfg, &mut state, epoch)?;
        }
        let train_loss = loss_sum / batches.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                detail: format!("training loss is {train_loss}"),
            });
        }
        let val = evaluate(&params, data.val)?;
        let score = selector.score(&val);
        match &best {
            Some((b, _, _)) if score <= b + IMPROVEMENT_EPS => since_improvement += 1,
            _ => {
                best = Some((score, epoch, params.clone()));
                since_improvement = 0;
            }
        }
        trace.records.push(EpochRecord {
            epoch,
            train_loss,
            val,
            params: cfg.keep_snapshots.then(|| params.clone()),
        });
        trace.stop_epoch = epoch;
        if cfg.patience > 0 && since_improvement >= cfg.patience {
            break;
        }
    }
    let (_, best_epoch, best) = best.expect("at least one epoch ran");
    Ok(TrainRun {
        trace,
        best,
        best_epoch,
        last: params,
    })
}
