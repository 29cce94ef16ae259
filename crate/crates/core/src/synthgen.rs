//! Gaussian group-shift data.
//!
//! Every example carries a label `y` and a spurious attribute `s`, both in
//! {-1, +1}. Core coordinates are drawn around `y`, spurious coordinates around
//! `s`. Majority groups have `s = y`, minority groups `s = -y`; the imbalance
//! between them is what makes `s` look predictive on training data.
//!
//! Feature columns are laid out `[core | spurious]`. Group ids:
//!
//! | id | y  | s  | kind     |
//! |----|----|----|----------|
//! | 0  | +1 | +1 | majority |
//! | 1  | -1 | -1 | majority |
//! | 2  | +1 | -1 | minority |
//! | 3  | -1 | +1 | minority |
//!
//! Each group draws from its own seeded stream, so group cardinalities and the
//! rows of one group never depend on the other groups.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, Axis};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding;

pub const NUM_GROUPS: usize = 4;

/// `(y, s)` for each group id.
pub const GROUP_LABELS: [(i8, i8); NUM_GROUPS] = [(1, 1), (-1, -1), (1, -1), (-1, 1)];

pub fn group_id(y: i8, s: i8) -> usize {
    match (y, s) {
        (1, 1) => 0,
        (-1, -1) => 1,
        (1, -1) => 2,
        (-1, 1) => 3,
        _ => panic!("labels must be +1 or -1, got y={y} s={s}"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupDataSpec {
    pub d_c: usize,
    pub d_s: usize,
    pub sigma2_core: f64,
    pub sigma2_spur: f64,
    /// Total majority samples, split evenly between groups 0 and 1.
    pub n_maj: usize,
    /// Total minority samples, split evenly between groups 2 and 3.
    pub n_min: usize,
    pub sigma2_noise: f64,
}

impl GroupDataSpec {
    /// The 2-D training distribution used throughout the synthetic study:
    /// one core and one spurious dimension, 900 majority and 100 minority points.
    pub fn table2() -> Self {
        GroupDataSpec {
            d_c: 1,
            d_s: 1,
            sigma2_core: 0.6,
            sigma2_spur: 0.1,
            n_maj: 900,
            n_min: 100,
            sigma2_noise: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.d_c + self.d_s
    }

    /// Same feature distribution, different group cardinalities.
    pub fn with_counts(&self, n_maj: usize, n_min: usize) -> Self {
        GroupDataSpec {
            n_maj,
            n_min,
            ..self.clone()
        }
    }

    pub fn group_counts(&self) -> [usize; NUM_GROUPS] {
        let maj = self.n_maj / 2;
        let min = self.n_min / 2;
        [maj, maj, min, min]
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_c == 0 || self.d_s == 0 {
            return Err(Error::InvalidSpec("d_c and d_s must be at least 1".into()));
        }
        for (name, v) in [
            ("sigma2_core", self.sigma2_core),
            ("sigma2_spur", self.sigma2_spur),
            ("sigma2_noise", self.sigma2_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidSpec(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.n_maj % 2 != 0 || self.n_min % 2 != 0 {
            return Err(Error::InvalidSpec(format!(
                "n_maj and n_min must be even, got {} and {}",
                self.n_maj, self.n_min
            )));
        }
        if self.n_maj + self.n_min == 0 {
            return Err(Error::InvalidSpec("no samples requested".into()));
        }
        Ok(())
    }
}

/// End-task examples. Rows are stored group by group.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub features: Array2<f64>,
    pub labels: Vec<i8>,
    pub spurious_attrs: Vec<i8>,
    pub group_ids: Vec<u8>,
}

impl LabeledDataset {
    pub fn new(features: Array2<f64>, labels: Vec<i8>, spurious_attrs: Vec<i8>) -> Result<Self> {
        let n = features.nrows();
        if labels.len() != n || spurious_attrs.len() != n {
            return Err(Error::Shape(format!(
                "{} feature rows, {} labels, {} attributes",
                n,
                labels.len(),
                spurious_attrs.len()
            )));
        }
        for (&y, &s) in labels.iter().zip(&spurious_attrs) {
            if y.abs() != 1 || s.abs() != 1 {
                return Err(Error::InvalidInput(format!("labels must be +-1, got y={y} s={s}")));
            }
        }
        let group_ids = labels
            .iter()
            .zip(&spurious_attrs)
            .map(|(&y, &s)| group_id(y, s) as u8)
            .collect();
        Ok(LabeledDataset {
            features,
            labels,
            spurious_attrs,
            group_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn group_counts(&self) -> [usize; NUM_GROUPS] {
        let mut counts = [0; NUM_GROUPS];
        for &g in &self.group_ids {
            counts[g as usize] += 1;
        }
        counts
    }

    /// Rows `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select(Axis(0), idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            spurious_attrs: idx.iter().map(|&i| self.spurious_attrs[i]).collect(),
            group_ids: idx.iter().map(|&i| self.group_ids[i]).collect(),
        }
    }

    /// CSV with header `y,s,group,x0,...,x{d-1}`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["y".to_string(), "s".to_string(), "group".to_string()];
        header.extend((0..self.dim()).map(|j| format!("x{j}")));
        wr.write_record(&header)?;
        for (i, row) in self.features.outer_iter().enumerate() {
            let mut rec = vec![
                self.labels[i].to_string(),
                self.spurious_attrs[i].to_string(),
                self.group_ids[i].to_string(),
            ];
            rec.extend(row.iter().map(|v| format!("{v:?}")));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.clone();
        if header.len() < 4 || &header[0] != "y" || &header[1] != "s" || &header[2] != "group" {
            return Err(Error::InvalidInput("expected header y,s,group,x0,...".into()));
        }
        let d = header.len() - 3;
        let (mut labels, mut attrs, mut flat) = (Vec::new(), Vec::new(), Vec::new());
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            let parse_err = |what: &str| Error::InvalidInput(format!("row {}: bad {what}", line + 2));
            let y: i8 = rec[0].parse().map_err(|_| parse_err("y"))?;
            let s: i8 = rec[1].parse().map_err(|_| parse_err("s"))?;
            let g: u8 = rec[2].parse().map_err(|_| parse_err("group"))?;
            if y.abs() != 1 || s.abs() != 1 || g as usize != group_id(y, s) {
                return Err(parse_err("group/label combination"));
            }
            labels.push(y);
            attrs.push(s);
            for j in 0..d {
                flat.push(rec[3 + j].parse::<f64>().map_err(|_| parse_err("feature"))?);
            }
        }
        let features = Array2::from_shape_vec((labels.len(), d), flat)
            .map_err(|e| Error::Shape(e.to_string()))?;
        LabeledDataset::new(features, labels, attrs)
    }

    /// Compact binary cache. Layout (all little-endian):
    /// magic `GRPB`, u32 version (1), u64 rows, u64 dims, then per row
    /// i8 y, i8 s, u8 group, followed by `dims` f64 features.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&BINARY_VERSION.to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&(self.dim() as u64).to_le_bytes())?;
        for (i, row) in self.features.outer_iter().enumerate() {
            w.write_all(&[self.labels[i] as u8, self.spurious_attrs[i] as u8, self.group_ids[i]])?;
            for v in row {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::InvalidInput("not a dataset cache (bad magic)".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != BINARY_VERSION {
            return Err(Error::InvalidInput("unsupported dataset cache version".into()));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let d = u64::from_le_bytes(b8) as usize;
        let (mut labels, mut attrs, mut flat) =
            (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n * d));
        let mut head = [0u8; 3];
        for _ in 0..n {
            r.read_exact(&mut head)?;
            labels.push(head[0] as i8);
            attrs.push(head[1] as i8);
            for _ in 0..d {
                r.read_exact(&mut b8)?;
                flat.push(f64::from_le_bytes(b8));
            }
        }
        let features =
            Array2::from_shape_vec((n, d), flat).map_err(|e| Error::Shape(e.to_string()))?;
        LabeledDataset::new(features, labels, attrs)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        if is_binary_path(path) {
            self.write_binary(file)
        } else {
            self.write_csv(file)
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        if is_binary_path(path) {
            Self::read_binary(file)
        } else {
            Self::read_csv(file)
        }
    }
}

const BINARY_MAGIC: &[u8; 4] = b"GRPB";
const BINARY_VERSION: u32 = 1;

fn is_binary_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

/// Reconstruction pairs: noised inputs and the clean features they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxDataset {
    pub noised: Array2<f64>,
    pub targets: Array2<f64>,
}

impl AuxDataset {
    pub fn new(noised: Array2<f64>, targets: Array2<f64>) -> Result<Self> {
        if noised.dim() != targets.dim() {
            return Err(Error::Shape(format!(
                "noised {:?} vs targets {:?}",
                noised.dim(),
                targets.dim()
            )));
        }
        Ok(AuxDataset { noised, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.targets.ncols()
    }

    pub fn select(&self, idx: &[usize]) -> AuxDataset {
        AuxDataset {
            noised: self.noised.select(Axis(0), idx),
            targets: self.targets.select(Axis(0), idx),
        }
    }
}

fn sample_with_counts(
    spec: &GroupDataSpec,
    counts: [usize; NUM_GROUPS],
    seed: u64,
) -> Result<LabeledDataset> {
    let n: usize = counts.iter().sum();
    let d = spec.dim();
    let core = Normal::new(0.0, spec.sigma2_core.sqrt()).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let spur = Normal::new(0.0, spec.sigma2_spur.sqrt()).map_err(|e| Error::InvalidSpec(e.to_string()))?;

    let mut features = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    let mut attrs = Vec::with_capacity(n);
    let mut row = 0;
    for (g, &count) in counts.iter().enumerate() {
        let (y, s) = GROUP_LABELS[g];
        let mut rng = seeding::stream(seed, seeding::GROUP_BASE + g as u64);
        for _ in 0..count {
            let mut x = features.row_mut(row);
            for j in 0..spec.d_c {
                x[j] = f64::from(y) + core.sample(&mut rng);
            }
            for j in spec.d_c..d {
                x[j] = f64::from(s) + spur.sample(&mut rng);
            }
            labels.push(y);
            attrs.push(s);
            row += 1;
        }
    }
    LabeledDataset::new(features, labels, attrs)
}

/// Draw `n_maj + n_min` rows: `n_maj / 2` in each majority group and
/// `n_min / 2` in each minority group.
pub fn sample_group_dataset(spec: &GroupDataSpec, seed: u64) -> Result<LabeledDataset> {
    spec.validate()?;
    sample_with_counts(spec, spec.group_counts(), seed)
}

/// Draw exactly `n_per_group` rows in each of the four groups.
pub fn make_balanced_test(spec: &GroupDataSpec, n_per_group: usize, seed: u64) -> Result<LabeledDataset> {
    if n_per_group == 0 {
        return Err(Error::InvalidSpec("n_per_group must be at least 1".into()));
    }
    // Cardinalities come from the argument; only the feature parameters matter.
    spec.with_counts(2 * n_per_group, 2 * n_per_group).validate()?;
    sample_with_counts(spec, [n_per_group; NUM_GROUPS], seed)
}

/// Add i.i.d. `N(0, sigma2_noise)` to every feature entry.
pub fn noise_dataset(data: &LabeledDataset, sigma2_noise: f64, seed: u64) -> Result<AuxDataset> {
    if !(sigma2_noise >= 0.0 && sigma2_noise.is_finite()) {
        return Err(Error::InvalidSpec(format!("noise variance must be >= 0, got {sigma2_noise}")));
    }
    let targets = data.features.clone();
    let mut noised = targets.clone();
    if sigma2_noise > 0.0 {
        let noise = Normal::new(0.0, sigma2_noise.sqrt()).expect("finite std");
        let mut rng = seeding::stream(seed, seeding::NOISE);
        noised.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
    }
    AuxDataset::new(noised, targets)
}
