use std::collections::{BTreeMap, VecDeque};
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::data::{DatasetBundle, LabeledBatch};
use super::model::{Mode, ModelSpec};
use super::optim::{Optimizer, OptimizerKind};
use crate::autodiff::{l2, ParamVector, Tensor};
use crate::error::{invalid, Error, Result};
use crate::measures::MeasureValue;
use crate::rng;

/// Number of trailing per-epoch gradient snapshots kept for the
/// training-time gradient-noise measure.
pub const SNAPSHOT_EPOCHS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate must be finite and ≥ 0"));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(invalid("batch_size and epochs must be ≥ 1"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(invalid("weight_decay must be finite and ≥ 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Done,
    Failed,
}

/// Gradient statistics collected while training.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GradTrace {
    /// Global L2 norm of every minibatch gradient, in step order.
    #[serde(with = "crate::serde_real::vec")]
    pub step_norms: Vec<f64>,
    /// Last minibatch gradient of each of the final epochs (at most
    /// [`SNAPSHOT_EPOCHS`]), oldest first.
    pub epoch_snapshots: Vec<Snapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot(#[serde(with = "crate::serde_real::vec")] pub Vec<f64>);

/// One trained configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    /// Hyperparameter tokens in grid axis order.
    pub assignment: Vec<(String, String)>,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub status: RunStatus,
    pub failure: Option<String>,
    pub init_digest: String,
    pub init_params: ParamVector,
    pub final_params: ParamVector,
    #[serde(with = "crate::serde_real::scalar")]
    pub train_acc: f64,
    #[serde(with = "crate::serde_real::scalar")]
    pub test_acc_iid: f64,
    #[serde(with = "crate::serde_real::map")]
    pub test_acc_shift: BTreeMap<u8, f64>,
    #[serde(with = "crate::serde_real::vec")]
    pub loss_curve: Vec<f64>,
    pub grad_trace: GradTrace,
    #[serde(with = "crate::serde_real::scalar")]
    pub wall_time_s: f64,
    /// Filled from the measure log when a store is loaded.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub measure_values: BTreeMap<String, MeasureValue>,
}

impl RunRecord {
    pub fn is_done(&self) -> bool {
        self.status == RunStatus::Done
    }

    /// Hyperparameter token of `axis`, if present.
    pub fn token(&self, axis: &str) -> Option<&str> {
        self.assignment.iter().find(|(a, _)| a == axis).map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_ce: f64,
    pub logits: Tensor,
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

pub fn evaluate(spec: &ModelSpec, params: &ParamVector, pool: &LabeledBatch) -> Result<Evaluation> {
    let logits = spec.logits(params, pool.inputs())?;
    Ok(evaluate_logits(logits, pool.labels()))
}

pub fn evaluate_logits(logits: Tensor, labels: &[usize]) -> Evaluation {
    let n = labels.len();
    let mut hits = 0usize;
    let mut ce = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let z = logits.row(i);
        if argmax(z) == y {
            hits += 1;
        }
        ce += crate::autodiff::log_sum_exp(z) - z[y];
    }
    Evaluation { accuracy: hits as f64 / n as f64, mean_ce: ce / n as f64, logits }
}

pub fn params_digest(p: &ParamVector) -> String {
    let mut h = Sha256::new();
    for v in p.flatten() {
        h.update(v.to_bits().to_le_bytes());
    }
    hex::encode(&h.finalize()[..16])
}

enum Outcome {
    Finished,
    Diverged(String),
}

/// Train `model` on `dataset.train` and evaluate on every pool.
///
/// A non-finite loss, gradient or parameter ends training early and the
/// record is returned with `RunStatus::Failed`.
pub fn train_run(dataset: &DatasetBundle, model: &ModelSpec, cfg: &TrainConfig) -> Result<RunRecord> {
    model.validate()?;
    cfg.validate()?;
    if dataset.input_dim() != model.input_dim || dataset.classes() != model.classes {
        return Err(Error::Shape("dataset and model dimensions differ".into()));
    }
    let started = Instant::now();
    let init = model.init_params(cfg.seed)?;
    let layout = init.layout();
    let mut theta = init.flatten();
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, cfg.weight_decay, theta.len())?;
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    let mut trace = GradTrace::default();
    let mut snapshots: VecDeque<Vec<f64>> = VecDeque::new();
    let n = dataset.train.len();
    let mut outcome = Outcome::Finished;

    'epochs: for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(cfg.seed, &[rng::label_hash("shuffle"), epoch as u64]));
        let mut total = 0.0;
        let mut last_grad = None;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = dataset.train.select(chunk)?;
            let params = ParamVector::from_flat(&layout, &theta)?;
            let mode = Mode::Train { seed: cfg.seed, step: opt.steps_taken() };
            let (loss, g) = match model.grad(&params, &batch, mode) {
                Ok(v) => v,
                Err(Error::NonFinite(what)) => {
                    outcome = Outcome::Diverged(format!("non-finite {what} at epoch {epoch}"));
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
            let g = g.flatten();
            trace.step_norms.push(l2(&g));
            let before = theta.clone();
            if let Err(Error::NonFinite(what)) = opt.step(&mut theta, &g) {
                theta = before;
                outcome = Outcome::Diverged(format!("non-finite {what} at epoch {epoch}"));
                break 'epochs;
            }
            total += loss * chunk.len() as f64;
            last_grad = Some(g);
        }
        loss_curve.push(total / n as f64);
        if let Some(g) = last_grad {
            snapshots.push_back(g);
            if snapshots.len() > SNAPSHOT_EPOCHS {
                snapshots.pop_front();
            }
        }
    }
    trace.epoch_snapshots = snapshots.into_iter().map(Snapshot).collect();

    let final_params = ParamVector::from_flat(&layout, &theta)?;
    let mut failure = match outcome {
        Outcome::Finished => None,
        Outcome::Diverged(msg) => Some(msg),
    };
    let accs = (|| -> Result<(f64, f64, BTreeMap<u8, f64>)> {
        let tr = evaluate(model, &final_params, &dataset.train)?.accuracy;
        let te = evaluate(model, &final_params, &dataset.test_iid)?.accuracy;
        let mut sh = BTreeMap::new();
        for (s, pool) in &dataset.test_shifted {
            sh.insert(*s, evaluate(model, &final_params, pool)?.accuracy);
        }
        Ok((tr, te, sh))
    })();
    let (train_acc, test_acc_iid, test_acc_shift) = match accs {
        Ok(v) => v,
        Err(Error::NonFinite(what)) => {
            failure.get_or_insert(format!("non-finite {what} during evaluation"));
            (0.0, 0.0, BTreeMap::new())
        }
        Err(e) => return Err(e),
    };

    Ok(RunRecord {
        run_id: String::new(),
        assignment: Vec::new(),
        model: model.clone(),
        train: cfg.clone(),
        status: if failure.is_some() { RunStatus::Failed } else { RunStatus::Done },
        failure,
        init_digest: params_digest(&init),
        init_params: init,
        final_params,
        train_acc,
        test_acc_iid,
        test_acc_shift,
        loss_curve,
        grad_trace: trace,
        wall_time_s: started.elapsed().as_secs_f64(),
        measure_values: BTreeMap::new(),
    })
}
