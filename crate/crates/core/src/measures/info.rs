//! Complexity penalties of classical and Bayesian information criteria.

use crate::error::{invalid, Error, Result};

pub const EPS_TIC: f64 = 1e-8;

/// 2k.
pub fn aic_bias(k: usize) -> f64 {
    2.0 * k as f64
}

/// 2k + 2k(k+1)/(N−k−1), defined only for N > k+1.
pub fn aicc_bias(k: usize, n: usize) -> Result<f64> {
    if n <= k + 1 {
        return Err(Error::Degenerate(format!("AICc needs N > k+1 (N = {n}, k = {k})")));
    }
    let (k, n) = (k as f64, n as f64);
    Ok(2.0 * k + 2.0 * k * (k + 1.0) / (n - k - 1.0))
}

/// Σ_j J_j / (I_j + ε).
pub fn tic_bias(diag_j: &[f64], diag_i: &[f64], eps: f64) -> Result<f64> {
    if diag_j.len() != diag_i.len() {
        return Err(Error::Shape("diag(J) and diag(I) differ in length".into()));
    }
    Ok(diag_j.iter().zip(diag_i).map(|(j, i)| j / (i + eps)).sum())
}

/// Σ_j J_j / max(min_j I_j, ε).
pub fn tic_bias_bound(diag_j: &[f64], diag_i: &[f64], eps: f64) -> Result<f64> {
    if diag_i.is_empty() {
        return Err(invalid("empty diag(I)"));
    }
    let min_i = diag_i.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(diag_j.iter().sum::<f64>() / min_i.max(eps))
}

/// diag(J) from per-sample score vectors: mean_n gₙ⊙gₙ.
pub fn empirical_fisher_diag(sample_grads: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = sample_grads.len();
    if n == 0 {
        return Err(invalid("empirical Fisher needs at least one sample"));
    }
    let d = sample_grads[0].len();
    Ok((0..d).map(|i| sample_grads.iter().map(|g| g[i] * g[i]).sum::<f64>() / n as f64).collect())
}

/// 2·Σₙ Var_s[ln p(yₙ|xₙ, θₛ)] with the unbiased (S−1) variance.
/// `loglik[s][n]` holds draw s, sample n.
pub fn waic_bias(loglik: &[Vec<f64>]) -> Result<f64> {
    let s = loglik.len();
    if s < 2 {
        return Err(Error::Degenerate(format!("WAIC needs at least 2 posterior draws, have {s}")));
    }
    let n = loglik[0].len();
    let mut total = 0.0;
    for i in 0..n {
        let mean = loglik.iter().map(|d| d[i]).sum::<f64>() / s as f64;
        total += loglik.iter().map(|d| (d[i] - mean).powi(2)).sum::<f64>() / (s - 1) as f64;
    }
    Ok(2.0 * total)
}
