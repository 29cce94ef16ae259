//! Group-wise evaluation, checkpoint selection and Pareto fronts.

use std::cmp::Ordering;
use std::io::Write;

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linmodel::{end_logit_unchecked, predict_label, ModelParams};
use crate::optim::TrainTrace;
use crate::synthgen::{LabeledDataset, NUM_GROUPS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    /// `None` for groups with no examples.
    pub per_group_acc: [Option<f64>; NUM_GROUPS],
    pub group_sizes: [usize; NUM_GROUPS],
    pub avg_acc: f64,
    /// Minimum over the groups that are present.
    pub wg_acc: f64,
    pub all_groups_present: bool,
}

impl GroupMetrics {
    /// Accuracy under a different group mixture, e.g. the training proportions.
    /// Absent groups contribute nothing and the remaining weights are renormalised.
    pub fn mixture_acc(&self, proportions: &[f64; NUM_GROUPS]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (acc, &p) in self.per_group_acc.iter().zip(proportions) {
            if let Some(acc) = acc {
                num += p * acc;
                den += p;
            }
        }
        num / den
    }

    pub fn group_acc_or_nan(&self, g: usize) -> f64 {
        self.per_group_acc[g].unwrap_or(f64::NAN)
    }
}

/// Fraction of examples with `sign(logit) = y`, overall and per group.
pub fn evaluate(params: &ModelParams, dataset: &LabeledDataset) -> Result<GroupMetrics> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput("cannot evaluate on an empty dataset".into()));
    }
    if dataset.dim() != params.dim() {
        return Err(Error::Shape(format!("model d = {}, data d = {}", params.dim(), dataset.dim())));
    }
    let mut correct = [0usize; NUM_GROUPS];
    let mut sizes = [0usize; NUM_GROUPS];
    for (i, x) in dataset.features.outer_iter().enumerate() {
        let g = dataset.group_ids[i] as usize;
        sizes[g] += 1;
        if predict_label(end_logit_unchecked(params, x)) == dataset.labels[i] {
            correct[g] += 1;
        }
    }
    Ok(metrics_from_counts(correct, sizes))
}

pub fn metrics_from_counts(correct: [usize; NUM_GROUPS], sizes: [usize; NUM_GROUPS]) -> GroupMetrics {
    let total: usize = sizes.iter().sum();
    let mut per_group_acc = [None; NUM_GROUPS];
    for g in 0..NUM_GROUPS {
        if sizes[g] > 0 {
            per_group_acc[g] = Some(correct[g] as f64 / sizes[g] as f64);
        }
    }
    let wg_acc = per_group_acc.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    GroupMetrics {
        per_group_acc,
        group_sizes: sizes,
        avg_acc: correct.iter().sum::<usize>() as f64 / total as f64,
        wg_acc,
        all_groups_present: sizes.iter().all(|&n| n > 0),
    }
}

/// Checkpoint selection rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    /// Highest validation worst-group accuracy; needs validation group labels.
    #[default]
    ValGp,
    /// Highest validation average accuracy.
    NoGp,
}

impl SelectionStrategy {
    pub fn score(self, m: &GroupMetrics) -> f64 {
        match self {
            SelectionStrategy::ValGp => m.wg_acc,
            SelectionStrategy::NoGp => m.avg_acc,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SelectionStrategy::ValGp => "val_gp",
            SelectionStrategy::NoGp => "no_gp",
        }
    }
}

/// Minimum margin by which a selector score must exceed the incumbent to count
/// as an improvement.
pub const IMPROVEMENT_EPS: f64 = 1e-12;

/// Epoch index (0-based) with the best selector score; the earliest wins ties.
pub fn select_checkpoint(trace: &TrainTrace, strategy: SelectionStrategy) -> Result<usize> {
    if trace.records.is_empty() {
        return Err(Error::InvalidInput("empty training trace".into()));
    }
    if strategy == SelectionStrategy::ValGp && trace.records.iter().any(|r| !r.val.all_groups_present) {
        return Err(Error::InvalidInput(
            "worst-group selection needs validation examples from every group".into(),
        ));
    }
    let mut best = 0;
    let mut best_score = strategy.score(&trace.records[0].val);
    for (i, r) in trace.records.iter().enumerate().skip(1) {
        let s = strategy.score(&r.val);
        if s > best_score + IMPROVEMENT_EPS {
            best = i;
            best_score = s;
        }
    }
    Ok(best)
}

/// `ln(‖a_spur‖₁ / ‖a_core‖₁)` with core coordinates first. Negative means the
/// featurizer puts more mass on core features. Zero spurious mass gives −∞.
pub fn spur_core_log_ratio(a: ArrayView1<f64>, d_c: usize, d_s: usize) -> Result<f64> {
    if d_c + d_s != a.len() {
        return Err(Error::Shape(format!("d_c + d_s = {} but a has {} entries", d_c + d_s, a.len())));
    }
    let core: f64 = a.iter().take(d_c).map(|v| v.abs()).sum();
    let spur: f64 = a.iter().skip(d_c).map(|v| v.abs()).sum();
    if core == 0.0 {
        return Err(Error::InfiniteRatio("featurizer has no mass on core features".into()));
    }
    Ok((spur / core).ln())
}

/// Hyper-parameters identifying one sweep cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigTag {
    pub method: String,
    pub alpha_aux: f64,
    pub alpha_reg: f64,
    /// `None` for an unconstrained featurizer.
    pub tau: Option<f64>,
    pub lr: f64,
    pub batch: usize,
    pub seed_set: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub avg_acc: f64,
    pub wg_acc: f64,
    pub tag: ConfigTag,
}

/// `p` dominates `q` when it is at least as good on both axes and strictly
/// better on one.
pub fn dominates(p: &ParetoPoint, q: &ParetoPoint) -> bool {
    p.avg_acc >= q.avg_acc && p.wg_acc >= q.wg_acc && (p.avg_acc > q.avg_acc || p.wg_acc > q.wg_acc)
}

/// Non-dominated points, sorted by `avg_acc` descending (then `wg_acc`
/// descending). Exact duplicates are all kept.
pub fn pareto_front(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    let by_avg_then_wg = |&i: &usize, &j: &usize| -> Ordering {
        points[j]
            .avg_acc
            .total_cmp(&points[i].avg_acc)
            .then(points[j].wg_acc.total_cmp(&points[i].wg_acc))
    };
    order.sort_by(by_avg_then_wg);

    let mut front = Vec::new();
    // Best wg among points with strictly greater avg than the current block.
    let mut best_wg_above = f64::NEG_INFINITY;
    let mut k = 0;
    while k < order.len() {
        let avg = points[order[k]].avg_acc;
        let mut end = k;
        while end < order.len() && points[order[end]].avg_acc == avg {
            end += 1;
        }
        // Within a block of equal avg, only the top wg survives.
        let top_wg = points[order[k]].wg_acc;
        if top_wg > best_wg_above {
            for &i in &order[k..end] {
                if points[i].wg_acc == top_wg {
                    front.push(points[i].clone());
                }
            }
        }
        best_wg_above = best_wg_above.max(top_wg);
        k = end;
    }
    front
}

/// `avg_acc,wg_acc,method,alpha_aux,alpha_reg,tau,lr,batch`
pub fn write_pareto_csv<W: Write>(points: &[ParetoPoint], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["avg_acc", "wg_acc", "method", "alpha_aux", "alpha_reg", "tau", "lr", "batch"])?;
    for p in points {
        wr.write_record([
            format!("{:?}", p.avg_acc),
            format!("{:?}", p.wg_acc),
            p.tag.method.clone(),
            format!("{:?}", p.tag.alpha_aux),
            format!("{:?}", p.tag.alpha_reg),
            p.tag.tau.map_or_else(|| "inf".to_string(), |t| format!("{t:?}")),
            format!("{:?}", p.tag.lr),
            p.tag.batch.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Two whitespace-separated columns (`avg wg`) for gnuplot.
pub fn write_front_dat<W: Write>(points: &[ParetoPoint], mut w: W) -> Result<()> {
    writeln!(w, "# avg_acc wg_acc")?;
    for p in points {
        writeln!(w, "{:?} {:?}", p.avg_acc, p.wg_acc)?;
    }
    Ok(())
}

pub fn read_pareto_csv<R: std::io::Read>(r: R) -> Result<Vec<ParetoPoint>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        if rec.len() < 8 {
            return Err(Error::InvalidInput(format!("row {}: expected 8 columns", line + 2)));
        }
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("row {}: column {} is not a number", line + 2, k + 1)))
        };
        out.push(ParetoPoint {
            avg_acc: num(0)?,
            wg_acc: num(1)?,
            tag: ConfigTag {
                method: rec[2].to_string(),
                alpha_aux: num(3)?,
                alpha_reg: num(4)?,
                tau: if &rec[5] == "inf" { None } else { Some(num(5)?) },
                lr: num(6)?,
                batch: rec[7]
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("row {}: bad batch", line + 2)))?,
                seed_set: String::new(),
            },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::EpochRecord;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn pt(avg: f64, wg: f64) -> ParetoPoint {
        ParetoPoint {
            avg_acc: avg,
            wg_acc: wg,
            tag: ConfigTag {
                method: "t".into(),
                alpha_aux: 0.0,
                alpha_reg: 0.0,
                tau: None,
                lr: 0.1,
                batch: 1,
                seed_set: String::new(),
            },
        }
    }

    fn metrics(acc: [f64; 4], sizes: [usize; 4]) -> GroupMetrics {
        let correct = [0, 1, 2, 3].map(|g| (acc[g] * sizes[g] as f64).round() as usize);
        metrics_from_counts(correct, sizes)
    }

    fn trace_from(val: Vec<GroupMetrics>) -> TrainTrace {
        TrainTrace {
            records: val
                .into_iter()
                .enumerate()
                .map(|(epoch, val)| EpochRecord {
                    epoch,
                    train_loss: 0.0,
                    val,
                    params: None,
                })
                .collect(),
            stop_epoch: 0,
        }
    }

    #[test]
    fn weighted_average_and_worst_group() {
        let m = metrics([1.0, 1.0, 0.0, 0.0], [450, 450, 50, 50]);
        assert_abs_diff_eq!(m.avg_acc, 0.9, epsilon = 1e-12);
        assert_eq!(m.wg_acc, 0.0);
        let m = metrics([0.9, 0.8, 0.95, 0.64], [100, 100, 100, 100]);
        assert_abs_diff_eq!(m.wg_acc, 0.64, epsilon = 1e-12);
    }

    #[test]
    fn perfect_predictions() {
        let p = ModelParams {
            a: array![1.0, 0.0],
            w_end: array![1.0, 0.0],
            w_aux: ndarray::Array2::eye(2),
            tau: None,
            fro_radius: 1.0,
        };
        let data = LabeledDataset::new(
            array![[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]],
            vec![1, -1, 1, -1],
            vec![1, -1, -1, 1],
        )
        .unwrap();
        let m = evaluate(&p, &data).unwrap();
        assert_eq!(m.per_group_acc, [Some(1.0); 4]);
        assert_eq!((m.avg_acc, m.wg_acc), (1.0, 1.0));
        assert!(evaluate(&p, &data.select(&[])).is_err());
    }

    #[test]
    fn absent_groups_are_flagged() {
        let m = metrics([1.0, 0.5, 0.0, 0.0], [4, 4, 0, 0]);
        assert!(!m.all_groups_present);
        assert_eq!(m.per_group_acc[2], None);
        assert_eq!(m.wg_acc, 0.5);
    }

    #[test]
    fn selection_rules() {
        let wg = |w: f64| metrics([1.0, 1.0, w, 1.0], [10, 10, 10, 10]);
        let t = trace_from(vec![wg(0.2), wg(0.5), wg(0.4)]);
        assert_eq!(select_checkpoint(&t, SelectionStrategy::ValGp).unwrap(), 1);
        let flat = trace_from(vec![wg(0.5), wg(0.5), wg(0.5)]);
        assert_eq!(select_checkpoint(&flat, SelectionStrategy::ValGp).unwrap(), 0);
        assert_eq!(select_checkpoint(&flat, SelectionStrategy::NoGp).unwrap(), 0);

        // wg peaks early, avg peaks late.
        let crafted = trace_from(vec![
            metrics([0.8, 0.8, 0.7, 0.7], [10, 10, 10, 10]),
            metrics([1.0, 1.0, 0.5, 0.5], [45, 45, 5, 5]),
            metrics([1.0, 1.0, 0.0, 0.0], [45, 45, 5, 5]),
        ]);
        assert_eq!(select_checkpoint(&crafted, SelectionStrategy::ValGp).unwrap(), 0);
        assert_eq!(select_checkpoint(&crafted, SelectionStrategy::NoGp).unwrap(), 1);

        let missing = trace_from(vec![metrics([1.0, 1.0, 0.0, 0.0], [3, 3, 0, 0])]);
        assert!(select_checkpoint(&missing, SelectionStrategy::ValGp).is_err());
        assert_eq!(select_checkpoint(&missing, SelectionStrategy::NoGp).unwrap(), 0);
        assert!(select_checkpoint(&trace_from(vec![]), SelectionStrategy::NoGp).is_err());
    }

    #[test]
    fn log_ratio_cases() {
        assert_eq!(spur_core_log_ratio(array![0.3, -0.3].view(), 1, 1).unwrap(), 0.0);
        assert_abs_diff_eq!(
            spur_core_log_ratio(array![0.09, 0.01].view(), 1, 1).unwrap(),
            -2.1972245773362196,
            epsilon = 1e-12
        );
        assert_eq!(spur_core_log_ratio(array![0.1, 0.0].view(), 1, 1).unwrap(), f64::NEG_INFINITY);
        assert!(matches!(
            spur_core_log_ratio(array![0.0, 0.1].view(), 1, 1),
            Err(Error::InfiniteRatio(_))
        ));
        assert!(spur_core_log_ratio(array![0.1, 0.1].view(), 2, 1).is_err());
    }

    #[test]
    fn pareto_cases() {
        let all = vec![pt(0.9, 0.5), pt(0.8, 0.6), pt(0.85, 0.55)];
        let f = pareto_front(&all);
        assert_eq!(f.len(), 3);
        assert_eq!(f.iter().map(|p| p.avg_acc).collect::<Vec<_>>(), vec![0.9, 0.85, 0.8]);

        let f = pareto_front(&[pt(0.85, 0.55), pt(0.7, 0.4)]);
        assert_eq!(f, vec![pt(0.85, 0.55)]);
        assert_eq!(pareto_front(&[pt(0.5, 0.5)]), vec![pt(0.5, 0.5)]);
        assert!(pareto_front(&[]).is_empty());

        // duplicates survive together, equal-avg lower-wg does not
        let f = pareto_front(&[pt(0.8, 0.6), pt(0.8, 0.6), pt(0.8, 0.5)]);
        assert_eq!(f, vec![pt(0.8, 0.6), pt(0.8, 0.6)]);
    }

    #[test]
    fn pareto_csv_round_trip() {
        let pts = vec![pt(0.9, 0.5), pt(0.8, 0.6)];
        let mut buf = Vec::new();
        write_pareto_csv(&pts, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone())
            .unwrap()
            .starts_with("avg_acc,wg_acc,method,alpha_aux,alpha_reg,tau,lr,batch\n"));
        let back = read_pareto_csv(&buf[..]).unwrap();
        assert_eq!(back, pts);
    }
}
