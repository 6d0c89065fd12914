//! Generalization-gap targets: training accuracy minus test accuracy.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::sandbox::{RunRecord, MAX_SEVERITY};

/// IID test pool or a shift severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TargetSpec {
    Iid,
    Shift(u8),
}

impl TargetSpec {
    pub fn name(self) -> String {
        match self {
            TargetSpec::Iid => "gen_gap_iid".into(),
            TargetSpec::Shift(s) => format!("gen_gap_shift{s}"),
        }
    }
}

impl fmt::Display for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetSpec::Iid => f.write_str("iid"),
            TargetSpec::Shift(s) => write!(f, "shift:{s}"),
        }
    }
}

impl FromStr for TargetSpec {
    type Err = Error;
    /// `iid` or `shift:<severity>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "iid" {
            return Ok(TargetSpec::Iid);
        }
        let sev = s
            .strip_prefix("shift:")
            .and_then(|v| v.parse::<u8>().ok())
            .filter(|v| (1..=MAX_SEVERITY).contains(v))
            .ok_or_else(|| invalid(format!("target `{s}` is not `iid` or `shift:1`..`shift:{MAX_SEVERITY}`")))?;
        Ok(TargetSpec::Shift(sev))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapTarget {
    pub spec: TargetSpec,
    pub values: BTreeMap<String, f64>,
}

impl GapTarget {
    pub fn name(&self) -> String {
        self.spec.name()
    }
}

/// Gap of one run for one target, if the run is done and has the accuracy.
pub fn gap_of(record: &RunRecord, spec: TargetSpec) -> Option<f64> {
    if !record.is_done() {
        return None;
    }
    let test = match spec {
        TargetSpec::Iid => Some(record.test_acc_iid),
        TargetSpec::Shift(s) => record.test_acc_shift.get(&s).copied(),
    }?;
    let g = record.train_acc - test;
    g.is_finite().then_some(g)
}

/// One target for IID plus one per shift severity seen on any done run.
pub fn compute_gap_targets(records: &[RunRecord]) -> Vec<GapTarget> {
    let severities: BTreeSet<u8> =
        records.iter().filter(|r| r.is_done()).flat_map(|r| r.test_acc_shift.keys().copied()).collect();
    let mut specs = vec![TargetSpec::Iid];
    specs.extend(severities.into_iter().map(TargetSpec::Shift));
    specs
        .into_iter()
        .map(|spec| {
            let mut values = BTreeMap::new();
            for r in records.iter().filter(|r| r.is_done()) {
                match gap_of(r, spec) {
                    Some(g) => {
                        values.insert(r.run_id.clone(), g);
                    }
                    None => log::info!("run {} has no accuracy for {}; excluded", r.run_id, spec.name()),
                }
            }
            GapTarget { spec, values }
        })
        .collect()
}
