//! Synthetic classification data and parameterized covariate shifts.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{invalid, Error, Result};
use crate::rng;

/// Highest shift severity.
pub const MAX_SEVERITY: u8 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    inputs: Tensor,
    labels: Vec<usize>,
    classes: usize,
}

impl LabeledBatch {
    pub fn new(inputs: Tensor, labels: Vec<usize>, classes: usize) -> Result<Self> {
        let (n, _) = inputs.dims2()?;
        if inputs.shape().len() != 2 {
            return Err(Error::Shape("inputs must be n × d".into()));
        }
        if n == 0 || labels.len() != n {
            return Err(Error::Shape(format!("{} labels for {n} rows", labels.len())));
        }
        if let Some(y) = labels.iter().find(|&&y| y >= classes) {
            return Err(invalid(format!("label {y} outside [0, {classes})")));
        }
        Ok(Self { inputs, labels, classes })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>, classes: usize) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::Shape("rows must be non-empty and equally long".into()));
        }
        let vals = rows.iter().flatten().copied().collect();
        Self::new(Tensor::matrix(rows.len(), d, vals)?, labels, classes)
    }

    pub fn inputs(&self) -> &Tensor {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.shape()[1]
    }

    /// Rows at `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let d = self.input_dim();
        let mut vals = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            vals.extend_from_slice(self.inputs.row(i));
        }
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        Self::new(Tensor::matrix(idx.len(), d, vals)?, labels, self.classes)
    }

    pub fn head(&self, n: usize) -> Result<Self> {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }

    /// Contiguous chunks of at most `size` rows.
    pub fn chunks(&self, size: usize) -> Result<Vec<Self>> {
        if size == 0 {
            return Err(invalid("chunk size must be positive"));
        }
        let idx: Vec<usize> = (0..self.len()).collect();
        idx.chunks(size).map(|c| self.select(c)).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.classes];
        for &y in &self.labels {
            c[y] += 1;
        }
        c
    }

    /// Header `f0..f{d-1},label`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let d = self.input_dim();
        let mut header: Vec<String> = (0..d).map(|i| format!("f{i}")).collect();
        header.push("label".into());
        out.write_record(&header).map_err(csv_err)?;
        for (i, y) in self.labels.iter().enumerate() {
            let mut rec: Vec<String> = self.inputs.row(i).iter().map(|v| format!("{v:?}")).collect();
            rec.push(y.to_string());
            out.write_record(&rec).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the format written by [`write_csv`](Self::write_csv). When
    /// `classes` is `None` it is inferred as `max(label) + 1`.
    pub fn read_csv<R: Read>(r: R, classes: Option<usize>) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers().map_err(csv_err)?.clone();
        let d = header.len().checked_sub(1).filter(|&d| d > 0).ok_or_else(|| invalid("csv needs feature columns"))?;
        for (i, h) in header.iter().enumerate() {
            let want = if i < d { format!("f{i}") } else { "label".into() };
            if h.trim() != want {
                return Err(invalid(format!("csv header column {i} is `{h}`, expected `{want}`")));
            }
        }
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (ln, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let row: Vec<f64> = rec
                .iter()
                .take(d)
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| invalid(format!("csv row {}: {e}", ln + 2)))?;
            let y: usize = rec
                .get(d)
                .ok_or_else(|| invalid(format!("csv row {} is short", ln + 2)))?
                .trim()
                .parse()
                .map_err(|e| invalid(format!("csv row {} label: {e}", ln + 2)))?;
            rows.push(row);
            labels.push(y);
        }
        let k = classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
        Self::from_rows(&rows, labels, k)
    }
}

fn csv_err(e: csv::Error) -> Error {
    invalid(format!("csv: {e}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Blobs,
    Moons,
    Spiral,
}

impl FromStr for DatasetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs" => Ok(Self::Blobs),
            "moons" => Ok(Self::Moons),
            "spiral" => Ok(Self::Spiral),
            other => Err(invalid(format!("unknown dataset kind `{other}`"))),
        }
    }
}

/// Covariate shift families. Each has a fixed per-severity schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    /// Rotation of the first two features by `s · 15°`.
    Rotate,
    /// Translation by `s · 0.5` along the all-ones direction.
    Translate,
    /// Additive Gaussian noise with std `s · 0.25` per feature.
    FeatureNoise,
    /// Multiplication by `1 + s · 0.25`.
    Scale,
}

impl FromStr for ShiftKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rotate" => Ok(Self::Rotate),
            "translate" => Ok(Self::Translate),
            "feature_noise" => Ok(Self::FeatureNoise),
            "scale" => Ok(Self::Scale),
            other => Err(invalid(format!("unknown shift kind `{other}`"))),
        }
    }
}

impl ShiftKind {
    /// Schedule parameter at `severity`: radians, offset norm, noise std, or
    /// relative scale change. Zero at severity 0, strictly increasing.
    pub fn magnitude(self, severity: u8) -> f64 {
        let s = f64::from(severity);
        match self {
            ShiftKind::Rotate => s * PI / 12.0,
            ShiftKind::Translate => s * 0.5,
            ShiftKind::FeatureNoise => s * 0.25,
            ShiftKind::Scale => s * 0.25,
        }
    }
}

pub fn apply_shift(batch: &LabeledBatch, shift: ShiftKind, severity: u8, seed: u64) -> Result<LabeledBatch> {
    if severity > MAX_SEVERITY {
        return Err(invalid(format!("severity {severity} outside 0..={MAX_SEVERITY}")));
    }
    if severity == 0 {
        return Ok(batch.clone());
    }
    let m = shift.magnitude(severity);
    let (n, d) = batch.inputs.dims2()?;
    let mut x = batch.inputs.values().to_vec();
    match shift {
        ShiftKind::Rotate => {
            if d < 2 {
                return Err(invalid("rotate shift needs at least two features"));
            }
            let (s, c) = m.sin_cos();
            for r in 0..n {
                let (a, b) = (x[r * d], x[r * d + 1]);
                x[r * d] = c * a - s * b;
                x[r * d + 1] = s * a + c * b;
            }
        }
        ShiftKind::Translate => {
            let step = m / (d as f64).sqrt();
            x.iter_mut().for_each(|v| *v += step);
        }
        ShiftKind::FeatureNoise => {
            let mut r = rng::stream(seed, &[rng::label_hash("feature_noise"), u64::from(severity)]);
            for v in x.iter_mut() {
                let z: f64 = r.sample(StandardNormal);
                *v += m * z;
            }
        }
        ShiftKind::Scale => {
            x.iter_mut().for_each(|v| *v *= 1.0 + m);
        }
    }
    LabeledBatch::new(Tensor::matrix(n, d, x)?, batch.labels.clone(), batch.classes)
}

/// Train pool, IID test pool, and shifted copies of the test pool.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub train: LabeledBatch,
    pub test_iid: LabeledBatch,
    pub test_shifted: BTreeMap<u8, LabeledBatch>,
    pub generator_seed: u64,
}

impl DatasetBundle {
    pub fn from_pools(train: LabeledBatch, test_iid: LabeledBatch, generator_seed: u64) -> Result<Self> {
        if train.input_dim() != test_iid.input_dim() || train.classes != test_iid.classes {
            return Err(Error::Shape("train and test pools disagree on dims or classes".into()));
        }
        Ok(Self { train, test_iid, test_shifted: BTreeMap::new(), generator_seed })
    }

    /// Populate severities 1..=5 of `shift` from the IID test pool.
    pub fn with_shift(mut self, shift: ShiftKind) -> Result<Self> {
        for s in 1..=MAX_SEVERITY {
            let b = apply_shift(&self.test_iid, shift, s, self.generator_seed)?;
            self.test_shifted.insert(s, b);
        }
        Ok(self)
    }

    /// Test pool at `severity`; severity 0 is the IID pool.
    pub fn shifted(&self, severity: u8) -> Option<&LabeledBatch> {
        if severity == 0 {
            Some(&self.test_iid)
        } else {
            self.test_shifted.get(&severity)
        }
    }

    pub fn input_dim(&self) -> usize {
        self.train.input_dim()
    }

    pub fn classes(&self) -> usize {
        self.train.classes
    }
}

pub fn make_dataset(
    kind: DatasetKind,
    n_per_split: usize,
    classes: usize,
    noise: f64,
    generator_seed: u64,
) -> Result<DatasetBundle> {
    if classes < 2 {
        return Err(invalid("need at least two classes"));
    }
    if n_per_split == 0 {
        return Err(invalid("split size must be positive"));
    }
    if n_per_split < 10 * classes {
        return Err(invalid(format!("split size {n_per_split} below 10 × {classes} classes")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(invalid("noise must be finite and non-negative"));
    }
    let train = sample_split(kind, n_per_split, classes, noise, generator_seed, "train")?;
    let test = sample_split(kind, n_per_split, classes, noise, generator_seed, "test")?;
    DatasetBundle::from_pools(train, test, generator_seed)
}

fn sample_split(
    kind: DatasetKind,
    n: usize,
    classes: usize,
    noise: f64,
    seed: u64,
    split: &str,
) -> Result<LabeledBatch> {
    let mut r = rng::labeled_stream(seed, split);
    let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    labels.shuffle(&mut r);
    let k = classes as f64;
    let mut rows = Vec::with_capacity(n);
    for &y in &labels {
        let c = y as f64;
        let (px, py) = match kind {
            DatasetKind::Blobs => {
                let a = 2.0 * PI * c / k;
                (3.0 * a.cos(), 3.0 * a.sin())
            }
            DatasetKind::Moons => {
                let t: f64 = r.random_range(0.0..PI);
                if y % 2 == 0 {
                    (c + t.cos(), t.sin())
                } else {
                    (c - t.cos(), 0.5 - t.sin())
                }
            }
            DatasetKind::Spiral => {
                let t: f64 = r.random_range(0.1..1.0);
                let a = 4.0 * t + 2.0 * PI * c / k;
                (3.0 * t * a.cos(), 3.0 * t * a.sin())
            }
        };
        let nx: f64 = r.sample(StandardNormal);
        let ny: f64 = r.sample(StandardNormal);
        rows.push(vec![px + noise * nx, py + noise * ny]);
    }
    LabeledBatch::from_rows(&rows, labels, classes)
}
