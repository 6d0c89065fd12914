//! All three statistics for every (measure, target) pair of a record set.

use serde::{Deserialize, Serialize};

use super::gaps::{gap_of, TargetSpec};
use super::psi::{granulated_psi, PsiMode};
use super::sign_error::{sign_error_distribution, uniform_weight};
use super::{cmi_score, Table};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::measures::{category_of, Category, CATALOG};
use crate::rng;
use crate::sandbox::RunRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub seed_axis: String,
    /// Axes for Ψ, environments and CMI conditioning; empty means every grid
    /// axis except the seed axis.
    pub axes: Vec<String>,
    pub psi_mode: PsiMode,
    pub n_eff_threshold: f64,
    pub cmi_depth: usize,
    pub pair_cap: usize,
    pub seed: u64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            seed_axis: "seed".into(),
            axes: Vec::new(),
            psi_mode: PsiMode::Standard,
            n_eff_threshold: 5.0,
            cmi_depth: 2,
            pair_cap: 50_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiRow {
    pub measure: String,
    pub category: Category,
    pub axis: String,
    pub target: String,
    pub mean_tau: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignErrorRow {
    pub measure: String,
    pub target: String,
    pub mean: Option<f64>,
    pub p90: Option<f64>,
    pub max: Option<f64>,
    pub n_env: usize,
    pub n_filtered: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmiRow {
    pub measure: String,
    pub target: String,
    pub k: Option<f64>,
    pub argmin: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StatsReport {
    pub psi: Vec<PsiRow>,
    pub sign_error: Vec<SignErrorRow>,
    pub cmi: Vec<CmiRow>,
    /// Requested targets no done run could provide.
    pub missing_targets: Vec<TargetSpec>,
}

/// Grid axes in assignment order, taken from the first done run.
pub fn grid_axes(records: &[RunRecord]) -> Vec<String> {
    records
        .iter()
        .find(|r| r.is_done())
        .map(|r| r.assignment.iter().map(|(a, _)| a.clone()).collect())
        .unwrap_or_default()
}

/// μ/g table for one measure and target; runs that are not done, lack the
/// gap, or whose measure is failed or non-finite are left out. Rows are
/// sorted by token so the result does not depend on store order.
pub fn build_table(records: &[RunRecord], axes: &[String], measure: &str, target: TargetSpec) -> Table {
    let mut t = Table::new(axes.to_vec());
    for r in records {
        let Some(g) = gap_of(r, target) else { continue };
        let Some(v) = r.measure_values.get(measure).filter(|v| v.is_ok() && v.value.is_finite()) else { continue };
        let tokens: Option<Vec<String>> = axes.iter().map(|a| r.token(a).map(str::to_string)).collect();
        if let Some(tokens) = tokens {
            t.rows.push(super::Row { tokens, mu: v.value, g });
        }
    }
    t.rows.sort_by(|a, b| a.tokens.cmp(&b.tokens).then(a.mu.total_cmp(&b.mu)).then(a.g.total_cmp(&b.g)));
    t
}

struct PairOutput {
    psi: Vec<PsiRow>,
    se: SignErrorRow,
    cmi: CmiRow,
}

/// Ψ, sign-error and K(μ) for every measure present on any run and every
/// available target. Rows are ordered by catalog position, then target,
/// then axis.
pub fn analyze(
    records: &[RunRecord],
    targets: &[TargetSpec],
    cfg: &StatsConfig,
    exec: Execution,
) -> Result<StatsReport> {
    if !records.iter().any(RunRecord::is_done) {
        return Err(Error::Degenerate("no done runs to analyze".into()));
    }
    let all_axes = grid_axes(records);
    let axes: Vec<String> = if cfg.axes.is_empty() {
        all_axes.iter().filter(|a| **a != cfg.seed_axis).cloned().collect()
    } else {
        cfg.axes.clone()
    };
    let mut missing_targets = Vec::new();
    let mut present_targets = Vec::new();
    for &t in targets {
        if records.iter().any(|r| gap_of(r, t).is_some()) {
            present_targets.push(t);
        } else {
            log::warn!("no run provides {}; target skipped", t.name());
            missing_targets.push(t);
        }
    }
    let measures: Vec<&str> =
        CATALOG.iter().map(|(n, _)| *n).filter(|n| records.iter().any(|r| r.measure_values.contains_key(*n))).collect();
    let jobs: Vec<(&str, TargetSpec)> =
        measures.iter().flat_map(|m| present_targets.iter().map(move |t| (*m, *t))).collect();

    let outputs = exec.map(&jobs, |&(measure, target)| {
        let table = build_table(records, &all_axes, measure, target);
        let tname = target.name();
        let category = category_of(measure).expect("catalog measure");
        let p = granulated_psi(&table, &axes, &cfg.seed_axis, cfg.psi_mode);
        let psi = match p.psi {
            Some(psi) => p
                .per_axis
                .iter()
                .filter_map(|(axis, v)| {
                    v.map(|mean_tau| PsiRow {
                        measure: measure.into(),
                        category,
                        axis: axis.clone(),
                        target: tname.clone(),
                        mean_tau,
                        psi,
                    })
                })
                .collect(),
            None => Vec::new(),
        };
        let env_table = restrict(&table, &axes, &cfg.seed_axis);
        let s = sign_error_distribution(&env_table, &cfg.seed_axis, cfg.n_eff_threshold, &uniform_weight);
        let se = SignErrorRow {
            measure: measure.into(),
            target: tname.clone(),
            mean: s.mean,
            p90: s.p90,
            max: s.max,
            n_env: s.n_env,
            n_filtered: s.n_filtered,
        };
        let seed = rng::derive_seed(cfg.seed, &[rng::label_hash(measure), rng::label_hash(&tname)]);
        let c = cmi_score(&table, &axes, cfg.cmi_depth, cfg.pair_cap, seed);
        let cmi =
            CmiRow { measure: measure.into(), target: tname, k: c.as_ref().map(|c| c.k), argmin: c.map(|c| c.argmin) };
        PairOutput { psi, se, cmi }
    });

    let mut report = StatsReport { missing_targets, ..Default::default() };
    for o in outputs {
        report.psi.extend(o.psi);
        report.sign_error.push(o.se);
        report.cmi.push(o.cmi);
    }
    Ok(report)
}

/// Keep only the analysis axes plus the seed axis, so environments are
/// formed over the requested axes.
fn restrict(table: &Table, axes: &[String], seed_axis: &str) -> Table {
    let cols: Vec<usize> =
        (0..table.axes.len()).filter(|&k| table.axes[k] == seed_axis || axes.contains(&table.axes[k])).collect();
    Table {
        axes: cols.iter().map(|&k| table.axes[k].clone()).collect(),
        rows: table
            .rows
            .iter()
            .map(|r| super::Row { tokens: cols.iter().map(|&k| r.tokens[k].clone()).collect(), mu: r.mu, g: r.g })
            .collect(),
    }
}
