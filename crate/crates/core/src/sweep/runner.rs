//! Sweep execution, resume and store-wide measure computation.

use std::collections::{BTreeMap, HashSet};
use std::time::Instant;

use super::config::SweepConfig;
use super::grid::{expand_grid, run_id, Assignment, HyperGrid};
use super::store::{now_millis, MeasureEntry, Store};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::measures::{compute_measures, MeasureConfig, MeasureStatus};
use crate::sandbox::{train_run, DatasetBundle, RunRecord, RunStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RunState {
    Pending,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRun {
    pub run_id: String,
    pub assignment: Assignment,
    pub state: RunState,
}

/// Every grid point of a config with its current state.
#[derive(Debug, Clone)]
pub struct SweepManifest {
    pub grid: HyperGrid,
    pub seed_offset: u64,
    pub runs: Vec<PlannedRun>,
}

impl SweepManifest {
    pub fn new(cfg: &SweepConfig, seed_offset: u64) -> Result<Self> {
        let grid = cfg.grid()?;
        let runs = expand_grid(&grid)
            .into_iter()
            .map(|a| PlannedRun { run_id: run_id(&a, seed_offset), assignment: a, state: RunState::Pending })
            .collect();
        Ok(Self { grid, seed_offset, runs })
    }

    /// Mark runs that already have a record as done or failed.
    pub fn sync(&mut self, records: &[RunRecord]) {
        let by_id: BTreeMap<&str, RunStatus> = records.iter().map(|r| (r.run_id.as_str(), r.status)).collect();
        for r in &mut self.runs {
            if let Some(s) = by_id.get(r.run_id.as_str()) {
                r.state = match s {
                    RunStatus::Done => RunState::Done,
                    RunStatus::Failed => RunState::Failed,
                };
            }
        }
    }

    /// Advance one run's state. Moving backwards is refused.
    pub fn transition(&mut self, id: &str, to: RunState) -> Result<()> {
        let r = self
            .runs
            .iter_mut()
            .find(|r| r.run_id == id)
            .ok_or_else(|| Error::InvalidArgument(format!("run {id} is not in the manifest")))?;
        let ok = matches!(
            (r.state, to),
            (RunState::Pending, RunState::Running) | (RunState::Running, RunState::Done | RunState::Failed)
        );
        if !ok {
            return Err(Error::InvalidArgument(format!("run {id}: {:?} -> {to:?} is not allowed", r.state)));
        }
        r.state = to;
        Ok(())
    }

    pub fn count(&self, state: RunState) -> usize {
        self.runs.iter().filter(|r| r.state == state).count()
    }
}

/// Assignments of the manifest without a done or failed record in `records`.
pub fn resume(manifest: &SweepManifest, records: &[RunRecord]) -> Vec<Assignment> {
    let have: HashSet<&str> = records.iter().map(|r| r.run_id.as_str()).collect();
    manifest.runs.iter().filter(|r| !have.contains(r.run_id.as_str())).map(|r| r.assignment.clone()).collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepSummary {
    pub planned: usize,
    pub already_stored: usize,
    pub trained: usize,
    pub done: usize,
    /// Run ids whose training diverged, in store order.
    pub failed: Vec<String>,
    pub wall_time_s: f64,
}

/// Train every grid point missing from the store. Runs are trained through
/// `exec` and written one at a time as they finish.
pub fn run_sweep(cfg: &SweepConfig, store: &mut Store, seed_offset: u64, exec: Execution) -> Result<SweepSummary> {
    let started = Instant::now();
    cfg.validate()?;
    store.write_config(cfg)?;
    let dataset = cfg.build_dataset()?;
    let mut manifest = SweepManifest::new(cfg, seed_offset)?;
    let existing = store.records()?;
    manifest.sync(&existing);
    let pending = resume(&manifest, &existing);
    let mut summary = SweepSummary {
        planned: manifest.runs.len(),
        already_stored: manifest.runs.len() - pending.len(),
        ..Default::default()
    };
    for a in &pending {
        manifest.transition(&run_id(a, seed_offset), RunState::Running)?;
    }
    log::info!(
        "{} runs planned, {} already stored, {} to train",
        summary.planned,
        summary.already_stored,
        pending.len()
    );

    let (input_dim, classes) = (dataset.input_dim(), dataset.classes());
    let mut first_err: Option<Error> = None;
    exec.for_each_with_sink(
        &pending,
        |a| train_one(cfg, &dataset, a, seed_offset, input_dim, classes),
        |res| {
            if first_err.is_some() {
                return;
            }
            let outcome = res.and_then(|rec| {
                store.persist(&rec)?;
                let state = if rec.is_done() { RunState::Done } else { RunState::Failed };
                manifest.transition(&rec.run_id, state)?;
                Ok(rec)
            });
            match outcome {
                Ok(rec) => {
                    summary.trained += 1;
                    if !rec.is_done() {
                        log::warn!("run {} failed: {}", rec.run_id, rec.failure.as_deref().unwrap_or("unknown"));
                    }
                    log::debug!("run {} finished in {:.2}s", rec.run_id, rec.wall_time_s);
                }
                Err(e) => first_err = Some(e),
            }
        },
    );
    if let Some(e) = first_err {
        return Err(e);
    }
    summary.done = manifest.count(RunState::Done);
    let failed: HashSet<String> =
        manifest.runs.iter().filter(|r| r.state == RunState::Failed).map(|r| r.run_id.clone()).collect();
    summary.failed = store.records()?.into_iter().filter(|r| failed.contains(&r.run_id)).map(|r| r.run_id).collect();
    summary.wall_time_s = started.elapsed().as_secs_f64();
    Ok(summary)
}

fn train_one(
    cfg: &SweepConfig,
    dataset: &DatasetBundle,
    assignment: &Assignment,
    seed_offset: u64,
    input_dim: usize,
    classes: usize,
) -> Result<RunRecord> {
    let (model, train) = cfg.resolve(assignment, seed_offset, input_dim, classes)?;
    let mut rec = train_run(dataset, &model, &train)?;
    rec.run_id = run_id(assignment, seed_offset);
    rec.assignment = assignment.clone();
    Ok(rec)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeasureSummary {
    pub runs: usize,
    pub computed: usize,
    pub skipped: usize,
    pub failed: usize,
}

/// Compute `names` on every done run of the store. Values already present
/// are kept unless `recompute` is set.
pub fn compute_store_measures(
    store: &mut Store,
    dataset: &DatasetBundle,
    cfg: &MeasureConfig,
    names: &[&str],
    recompute: bool,
    exec: Execution,
) -> Result<MeasureSummary> {
    cfg.validate()?;
    let records = store.records()?;
    let done: Vec<&RunRecord> = records.iter().filter(|r| r.is_done()).collect();
    if done.is_empty() {
        return Err(Error::Degenerate("store has no done runs".into()));
    }
    let jobs: Vec<(&RunRecord, Vec<&str>)> = done
        .iter()
        .map(|r| {
            let todo = names.iter().copied().filter(|n| recompute || !r.measure_values.contains_key(*n)).collect();
            (*r, todo)
        })
        .collect();
    let mut summary = MeasureSummary { runs: done.len(), ..Default::default() };
    summary.skipped = jobs.iter().map(|(_, t)| names.len() - t.len()).sum();
    let todo: Vec<&(&RunRecord, Vec<&str>)> = jobs.iter().filter(|(_, t)| !t.is_empty()).collect();

    let mut first_err: Option<Error> = None;
    exec.for_each_with_sink(
        &todo,
        |(rec, names)| compute_measures(rec, dataset, cfg, names).map(|v| (rec.run_id.clone(), v)),
        |res| {
            if first_err.is_some() {
                return;
            }
            let res = res.and_then(|(id, values)| {
                let at = now_millis();
                let entries: Vec<MeasureEntry> = values
                    .into_iter()
                    .map(|value| MeasureEntry { run_id: id.clone(), computed_at: at, value })
                    .collect();
                store.append_measures(&entries)?;
                Ok(entries)
            });
            match res {
                Ok(entries) => {
                    summary.computed += entries.len();
                    summary.failed += entries.iter().filter(|e| e.value.status == MeasureStatus::Failed).count();
                }
                Err(e) => first_err = Some(e),
            }
        },
    );
    match first_err {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}
