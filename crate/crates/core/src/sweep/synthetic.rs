//! Records with planted accuracies and measure values, for exercising the
//! statistics and reporting stages without training.

use std::collections::BTreeMap;

use rand::Rng;

use super::grid::{expand_grid, run_id, Assignment, HyperGrid};
use crate::error::Result;
use crate::measures::MeasureValue;
use crate::rng;
use crate::sandbox::{params_digest, GradTrace, ModelSpec, OptimizerKind, RunRecord, RunStatus, TrainConfig};

/// How a planted measure relates to the IID gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Planted {
    /// μ equals the IID gap.
    Gap,
    /// μ is drawn independently of everything else.
    Noise,
}

/// A done record carrying only accuracies; `gap_shift` maps severity to gap.
pub fn synthetic_record(assignment: Assignment, gap_iid: f64, gap_shift: &BTreeMap<u8, f64>) -> Result<RunRecord> {
    let model = ModelSpec::new(2, vec![], 2);
    let params = model.init_params(0)?;
    Ok(RunRecord {
        run_id: run_id(&assignment, 0),
        assignment,
        model,
        train: TrainConfig {
            optimizer: OptimizerKind::Sgd,
            learning_rate: 0.1,
            batch_size: 1,
            weight_decay: 0.0,
            epochs: 1,
            seed: 0,
        },
        status: RunStatus::Done,
        failure: None,
        init_digest: params_digest(&params),
        init_params: params.clone(),
        final_params: params,
        train_acc: 1.0,
        test_acc_iid: 1.0 - gap_iid,
        test_acc_shift: gap_shift.iter().map(|(s, g)| (*s, 1.0 - g)).collect(),
        loss_curve: Vec::new(),
        grad_trace: GradTrace::default(),
        wall_time_s: 0.0,
        measure_values: BTreeMap::new(),
    })
}

/// One record per grid point with gaps drawn uniformly from (0, 0.5) and
/// the listed measures planted. Reproducible from `seed`.
pub fn planted_records(
    grid: &HyperGrid,
    seed: u64,
    shifts: &[u8],
    measures: &[(&str, Planted)],
) -> Result<Vec<RunRecord>> {
    let mut r = rng::labeled_stream(seed, "planted");
    expand_grid(grid)
        .into_iter()
        .map(|a| {
            let g: f64 = r.random_range(0.0..0.5);
            let gs: BTreeMap<u8, f64> = shifts.iter().map(|&s| (s, r.random_range(0.0..0.5))).collect();
            let mut rec = synthetic_record(a, g, &gs)?;
            for &(name, how) in measures {
                let mu = match how {
                    Planted::Gap => g,
                    Planted::Noise => r.random_range(0.0..1.0),
                };
                rec.measure_values.insert(name.to_string(), MeasureValue::ok(name, mu, 0)?);
            }
            Ok(rec)
        })
        .collect()
}
