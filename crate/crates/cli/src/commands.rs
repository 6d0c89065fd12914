use std::fs;
use std::path::Path;

use anyhow::Context;
use genmeter_core::measures::{all_names, select};
use genmeter_core::stats::{analyze, compute_gap_targets, TargetSpec};
use genmeter_core::sweep::{compute_store_measures, load_config, load_records, run_sweep, Store, SweepConfig};
use genmeter_core::Execution;

use crate::{plot, tables, Global};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// The sweep finished but this many runs are marked failed.
    RunsFailed(usize),
}

fn execution(g: &Global) -> Execution {
    if g.jobs == 1 {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

pub fn cmd_sweep(config: &Path, store: &Path, g: &Global) -> anyhow::Result<Outcome> {
    let cfg = SweepConfig::load(config)?;
    let mut st = Store::open(store)?;
    let s = run_sweep(&cfg, &mut st, g.seed_offset, execution(g))?;
    println!(
        "sweep: {} planned, {} already stored, {} trained, {} done, {} failed ({:.1}s)",
        s.planned,
        s.already_stored,
        s.trained,
        s.done,
        s.failed.len(),
        s.wall_time_s
    );
    for id in &s.failed {
        println!("failed: {id}");
    }
    Ok(if s.failed.is_empty() { Outcome::Success } else { Outcome::RunsFailed(s.failed.len()) })
}

pub fn cmd_measure(store: &Path, only: Option<&str>, recompute: bool, g: &Global) -> anyhow::Result<Outcome> {
    let names = match only {
        Some(f) => select(f)?,
        None => all_names(),
    };
    let cfg = load_config(store)?;
    let dataset = cfg.build_dataset()?;
    let mut st = Store::open(store)?;
    let s = compute_store_measures(&mut st, &dataset, &cfg.measures, &names, recompute, execution(g))?;
    println!(
        "measures: {} runs, {} values computed ({} failed), {} already present",
        s.runs, s.computed, s.failed, s.skipped
    );
    Ok(Outcome::Success)
}

pub fn cmd_stats(store: &Path, targets: &[String], out: &Path, g: &Global) -> anyhow::Result<Outcome> {
    let records = load_records(store)?;
    let cfg = load_config(store).map(|c| c.stats).unwrap_or_else(|e| {
        log::warn!("{e}; using default stats settings");
        Default::default()
    });
    let specs: Vec<TargetSpec> = if targets.is_empty() {
        compute_gap_targets(&records).into_iter().map(|t| t.spec).collect()
    } else {
        targets.iter().map(|t| t.parse()).collect::<Result<_, _>>()?
    };
    let report = analyze(&records, &specs, &cfg, execution(g))?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    tables::write_report(out, &report)?;
    tables::write_measures(&out.join(tables::MEASURES_CSV), &records)?;
    println!(
        "stats: {} psi rows, {} sign-error rows, {} cmi rows written to {}",
        report.psi.len(),
        report.sign_error.len(),
        report.cmi.len(),
        out.display()
    );
    Ok(Outcome::Success)
}

pub fn cmd_plot(dir: &Path) -> anyhow::Result<Outcome> {
    let psi = tables::read_psi(&dir.join(tables::PSI_CSV))?;
    let se = tables::read_sign_error(&dir.join(tables::SIGN_ERROR_CSV))?;
    let written = plot::write_all(dir, &psi, &se)?;
    println!("plot: {} SVG files written to {}", written.len(), dir.display());
    Ok(Outcome::Success)
}
