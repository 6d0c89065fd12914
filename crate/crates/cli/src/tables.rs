//! CSV outputs of the stats stage.
//!
//! | file             | columns                                              |
//! |------------------|------------------------------------------------------|
//! | `psi_table.csv`  | measure, category, axis, target, mean_tau, psi       |
//! | `sign_error.csv` | measure, target, mean, p90, max, n_env, n_filtered   |
//! | `cmi.csv`        | measure, target, k, argmin                           |
//! | `measures.csv`   | run_id, measure, category, value, status             |
//!
//! Missing values are written as `NA`. `argmin` joins axis names with `+`
//! and is `{}` for the empty conditioning set.

use std::path::Path;

use anyhow::{anyhow, Context};
use genmeter_core::measures::{MeasureStatus, CATALOG};
use genmeter_core::sandbox::RunRecord;
use genmeter_core::stats::{PsiRow, SignErrorRow, StatsReport};

pub const PSI_CSV: &str = "psi_table.csv";
pub const SIGN_ERROR_CSV: &str = "sign_error.csv";
pub const CMI_CSV: &str = "cmi.csv";
pub const MEASURES_CSV: &str = "measures.csv";

pub const PSI_HEADER: [&str; 6] = ["measure", "category", "axis", "target", "mean_tau", "psi"];
pub const SIGN_ERROR_HEADER: [&str; 7] = ["measure", "target", "mean", "p90", "max", "n_env", "n_filtered"];
pub const CMI_HEADER: [&str; 4] = ["measure", "target", "k", "argmin"];
pub const MEASURES_HEADER: [&str; 5] = ["run_id", "measure", "category", "value", "status"];

pub const NA: &str = "NA";

/// Shortest text that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), num)
}

pub fn argmin_label(axes: &[String]) -> String {
    if axes.is_empty() {
        "{}".into()
    } else {
        axes.join("+")
    }
}

fn writer(path: &Path) -> anyhow::Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_report(dir: &Path, report: &StatsReport) -> anyhow::Result<()> {
    let mut w = writer(&dir.join(PSI_CSV))?;
    w.write_record(PSI_HEADER)?;
    for r in &report.psi {
        w.write_record([&r.measure, r.category.as_str(), &r.axis, &r.target, &num(r.mean_tau), &num(r.psi)])?;
    }
    w.flush()?;

    let mut w = writer(&dir.join(SIGN_ERROR_CSV))?;
    w.write_record(SIGN_ERROR_HEADER)?;
    for r in &report.sign_error {
        w.write_record([
            &r.measure,
            &r.target,
            &opt(r.mean),
            &opt(r.p90),
            &opt(r.max),
            &r.n_env.to_string(),
            &r.n_filtered.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = writer(&dir.join(CMI_CSV))?;
    w.write_record(CMI_HEADER)?;
    for r in &report.cmi {
        let arg = r.argmin.as_deref().map_or_else(|| NA.to_string(), argmin_label);
        w.write_record([&r.measure, &r.target, &opt(r.k), &arg])?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format table of every stored measure value, by run id then catalog order.
pub fn write_measures(path: &Path, records: &[RunRecord]) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    w.write_record(MEASURES_HEADER)?;
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    for r in sorted {
        for (name, _) in CATALOG.iter() {
            let Some(v) = r.measure_values.get(*name) else { continue };
            let status = match v.status {
                MeasureStatus::Ok => "ok",
                MeasureStatus::Failed => "failed",
            };
            w.write_record([&r.run_id, *name, v.category.as_str(), &num(v.value), status])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn reader(path: &Path, header: &[&str]) -> anyhow::Result<csv::Reader<std::fs::File>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let got: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(anyhow!("{}: header {:?} does not match {:?}", path.display(), got, header));
    }
    Ok(r)
}

fn parse_num(path: &Path, line: usize, field: &str) -> anyhow::Result<f64> {
    field.parse().map_err(|_| anyhow!("{} line {line}: `{field}` is not a number", path.display()))
}

fn parse_opt(path: &Path, line: usize, field: &str) -> anyhow::Result<Option<f64>> {
    if field == NA {
        Ok(None)
    } else {
        parse_num(path, line, field).map(Some)
    }
}

pub fn read_psi(path: &Path) -> anyhow::Result<Vec<PsiRow>> {
    let mut out = Vec::new();
    for (i, rec) in reader(path, &PSI_HEADER)?.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        out.push(PsiRow {
            measure: rec[0].to_string(),
            category: rec[1].parse().map_err(|e| anyhow!("{} line {line}: {e}", path.display()))?,
            axis: rec[2].to_string(),
            target: rec[3].to_string(),
            mean_tau: parse_num(path, line, &rec[4])?,
            psi: parse_num(path, line, &rec[5])?,
        });
    }
    Ok(out)
}

pub fn read_sign_error(path: &Path) -> anyhow::Result<Vec<SignErrorRow>> {
    let mut out = Vec::new();
    for (i, rec) in reader(path, &SIGN_ERROR_HEADER)?.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let count =
            |f: &str| f.parse::<usize>().map_err(|_| anyhow!("{} line {line}: bad count `{f}`", path.display()));
        out.push(SignErrorRow {
            measure: rec[0].to_string(),
            target: rec[1].to_string(),
            mean: parse_opt(path, line, &rec[2])?,
            p90: parse_opt(path, line, &rec[3])?,
            max: parse_opt(path, line, &rec[4])?,
            n_env: count(&rec[5])?,
            n_filtered: count(&rec[6])?,
        });
    }
    Ok(out)
}
