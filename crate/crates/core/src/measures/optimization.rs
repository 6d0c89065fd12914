//! Gradient statistics across batches.

use super::Aggregate;
use crate::autodiff::l2;
use crate::error::{Error, Result};

pub const EPS_GNS: f64 = 1e-12;

/// Per-batch gradients collected at a fixed parameter vector (or at a
/// sequence of training snapshots).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradHistory {
    grads: Vec<Vec<f64>>,
}

impl GradHistory {
    pub fn new(grads: Vec<Vec<f64>>) -> Self {
        Self { grads }
    }

    pub fn batches(&self) -> usize {
        self.grads.len()
    }

    pub fn grads(&self) -> &[Vec<f64>] {
        &self.grads
    }

    /// ḡ_i.
    pub fn means(&self) -> Vec<f64> {
        let b = self.grads.len() as f64;
        let d = self.grads.first().map_or(0, Vec::len);
        (0..d).map(|i| self.grads.iter().map(|g| g[i]).sum::<f64>() / b).collect()
    }

    /// Population variance Var_i = (1/B)·Σ_b (g_b,i − ḡ_i)².
    pub fn variances(&self) -> Result<Vec<f64>> {
        if self.grads.len() < 2 {
            return Err(Error::Degenerate(format!("variance needs B ≥ 2 batches, have {}", self.grads.len())));
        }
        let mean = self.means();
        let b = self.grads.len() as f64;
        Ok(mean
            .iter()
            .enumerate()
            .map(|(i, m)| self.grads.iter().map(|g| (g[i] - m).powi(2)).sum::<f64>() / b)
            .collect())
    }

    /// (1/d)·Σ_i Var_i.
    pub fn mean_variance(&self) -> Result<f64> {
        let v = self.variances()?;
        Ok(v.iter().sum::<f64>() / v.len().max(1) as f64)
    }

    /// (1/d)·Σ_i Var_i / (ḡ_i² + ε).
    pub fn noise_scale(&self, eps: f64) -> Result<f64> {
        let v = self.variances()?;
        let m = self.means();
        Ok(v.iter().zip(&m).map(|(v, m)| v / (m * m + eps)).sum::<f64>() / v.len().max(1) as f64)
    }

    pub fn norms(&self) -> Vec<f64> {
        self.grads.iter().map(|g| l2(g)).collect()
    }

    /// agg_b ‖g_b‖₂.
    pub fn norm(&self, agg: Aggregate) -> Result<f64> {
        if self.grads.is_empty() {
            return Err(Error::Degenerate("no gradient batches".into()));
        }
        Ok(agg.apply(&self.norms()))
    }
}
