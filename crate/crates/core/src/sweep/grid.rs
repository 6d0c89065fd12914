//! Hyperparameter grids, their expansion and content-derived run ids.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Axis name → value token pairs of one run.
pub type Assignment = Vec<(String, String)>;

/// Pseudo-axis that makes run ids depend on a nonzero global seed offset.
pub const SEED_OFFSET_AXIS: &str = "__seed_offset";

/// Axes in lexicographic name order, each with its exact value tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HyperGrid {
    axes: Vec<(String, Vec<String>)>,
}

impl HyperGrid {
    pub fn new(mut axes: Vec<(String, Vec<String>)>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Config("grid has no axes".into()));
        }
        axes.sort_by(|a, b| a.0.cmp(&b.0));
        for w in axes.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Config(format!("axis `{}` appears twice", w[0].0)));
            }
        }
        for (name, vals) in &axes {
            if vals.is_empty() {
                return Err(Error::Config(format!("axis `{name}` has no values")));
            }
            let mut s = vals.clone();
            s.sort();
            if s.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Config(format!("axis `{name}` repeats a value")));
            }
        }
        Ok(Self { axes })
    }

    pub fn axes(&self) -> &[(String, Vec<String>)] {
        &self.axes
    }

    pub fn axis_names(&self) -> Vec<&str> {
        self.axes.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn size(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }
}

/// Cartesian product with the last axis varying fastest.
pub fn expand_grid(grid: &HyperGrid) -> Vec<Assignment> {
    let mut out: Vec<Assignment> = vec![Vec::new()];
    for (name, vals) in grid.axes() {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                vals.iter().map(move |v| {
                    let mut a = prefix.clone();
                    a.push((name.clone(), v.clone()));
                    a
                })
            })
            .collect();
    }
    out
}

/// First 16 hex digits of the SHA-256 of the sorted `name=value` lines.
pub fn run_id(assignment: &[(String, String)], seed_offset: u64) -> String {
    let mut lines: Vec<String> = assignment.iter().map(|(k, v)| format!("{k}={v}")).collect();
    if seed_offset != 0 {
        lines.push(format!("{SEED_OFFSET_AXIS}={seed_offset}"));
    }
    lines.sort();
    let mut h = Sha256::new();
    for l in &lines {
        h.update(l.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())[..16].to_string()
}
