//! Rank-based predictivity statistics of measures against generalization gaps.

pub mod cmi;
pub mod gaps;
pub mod psi;
pub mod report;
pub mod sign_error;

pub use cmi::{cmi_score, ncmi, ordered_pairs, sign_pairs, CmiResult};
pub use gaps::{compute_gap_targets, GapTarget, TargetSpec};
pub use psi::{granulated_psi, PsiMode, PsiResult};
pub use report::{analyze, CmiRow, PsiRow, SignErrorRow, StatsConfig, StatsReport};
pub use sign_error::{
    environments, sign_error_distribution, sign_error_environment, EnvSignError, Environment, SignErrorSummary,
};

use crate::error::{invalid, Result};

/// sign with sign(0) = 0.
pub fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Kendall's τ without tie correction: (2/(N(N−1)))·Σ_{i<j} sign(xᵢ−xⱼ)·sign(yᵢ−yⱼ).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(invalid("kendall_tau series differ in length"));
    }
    let n = x.len();
    if n < 2 {
        return Err(invalid("kendall_tau needs at least two points"));
    }
    let mut s: i64 = 0;
    for i in 0..n {
        for j in i + 1..n {
            s += i64::from(sign(x[i] - x[j]) * sign(y[i] - y[j]));
        }
    }
    Ok(2.0 * s as f64 / (n * (n - 1)) as f64)
}

/// Order statistic at index ⌊p·(n−1)⌋ of the sorted values.
pub fn lower_percentile(xs: &[f64], p: f64) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let idx = ((p * (s.len() - 1) as f64).floor() as usize).min(s.len() - 1);
    Some(s[idx])
}

/// Runs of one (measure, target) pair: exact hyperparameter tokens in a
/// fixed axis order, the measure value μ and the gap g.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub axes: Vec<String>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub tokens: Vec<String>,
    pub mu: f64,
    pub g: f64,
}

impl Table {
    pub fn new(axes: Vec<String>) -> Self {
        Self { axes, rows: Vec::new() }
    }

    pub fn push(&mut self, tokens: Vec<String>, mu: f64, g: f64) -> Result<()> {
        if tokens.len() != self.axes.len() {
            return Err(invalid(format!("row has {} tokens for {} axes", tokens.len(), self.axes.len())));
        }
        self.rows.push(Row { tokens, mu, g });
        Ok(())
    }

    pub fn axis_index(&self, axis: &str) -> Option<usize> {
        self.axes.iter().position(|a| a == axis)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}
