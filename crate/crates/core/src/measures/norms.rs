//! Margin, norm and spectral measures.

use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::{dot, l2, ParamVector, Tensor};
use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::sandbox::ModelSpec;
use crate::stats::lower_percentile;

pub const EPS_MARGIN: f64 = 1e-6;

/// Per-sample margins and a lower-tail percentile of them.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginStats {
    pub margins: Vec<f64>,
    pub p: f64,
    /// Exact order statistic at index ⌊p·(n−1)⌋ of the sorted margins.
    pub quantile: f64,
    pub eps_margin: f64,
}

/// mₙ = z[yₙ] − max_{k≠yₙ} z[k].
pub fn margin_stats(logits: &Tensor, labels: &[usize], p: f64) -> Result<MarginStats> {
    if labels.is_empty() {
        return Err(invalid("margin statistics need at least one sample"));
    }
    let margins: Vec<f64> = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let z = logits.row(i);
            let other =
                z.iter().enumerate().filter(|(k, _)| *k != y).map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
            z[y] - other
        })
        .collect();
    let quantile = lower_percentile(&margins, p).ok_or_else(|| invalid("empty margins"))?;
    Ok(MarginStats { margins, p, quantile, eps_margin: EPS_MARGIN })
}

/// sign(z)·max(|z|, ε), with sign(0) taken as +1.
pub fn clip_margin(z: f64, eps: f64) -> f64 {
    let s = if z < 0.0 { -1.0 } else { 1.0 };
    s * z.abs().max(eps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginNorms {
    pub inverse_margin_p10: f64,
    pub l2_over_margin_p10: f64,
    pub l1_over_margin_p10: f64,
    pub margin_normalized_param_norm: f64,
}

pub fn margin_norms(params: &ParamVector, m: &MarginStats) -> MarginNorms {
    let denom = m.quantile.abs().max(m.eps_margin);
    let l2_over = params.l2_norm() / denom;
    MarginNorms {
        inverse_margin_p10: 1.0 / clip_margin(m.quantile, m.eps_margin),
        l2_over_margin_p10: l2_over,
        l1_over_margin_p10: params.l1_norm() / denom,
        margin_normalized_param_norm: l2_over,
    }
}

/// ‖θ − θ₀‖₂ over every segment.
pub fn frobenius_distance(theta: &ParamVector, theta0: &ParamVector) -> Result<f64> {
    if theta.layout() != theta0.layout() {
        return Err(Error::Shape("θ and θ₀ have different layouts".into()));
    }
    let a = theta.flatten();
    let b = theta0.flatten();
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// sqrt(mean_n (θᵀgₙ)²) for per-sample score vectors gₙ.
pub fn fisher_rao_norm(theta: &[f64], sample_grads: &[Vec<f64>]) -> Result<f64> {
    if sample_grads.is_empty() {
        return Err(invalid("fisher-rao norm needs at least one sample gradient"));
    }
    let s: f64 = sample_grads.iter().map(|g| dot(theta, g).powi(2)).sum();
    Ok((s / sample_grads.len() as f64).sqrt())
}

/// Largest singular value of a matrix by power iteration on WᵀW.
///
/// Converged once successive estimates differ by at most `tol·σ̂`.
pub fn spectral_norm(w: &Tensor, iters: usize, tol: f64, seed: u64) -> Result<f64> {
    let (rows, cols) = w.dims2()?;
    if iters == 0 {
        return Err(invalid("power iteration needs iters ≥ 1"));
    }
    if w.values().iter().all(|v| *v == 0.0) {
        return Err(invalid("spectral norm of a zero matrix"));
    }
    let a = w.values();
    let mut r = rng::labeled_stream(seed, "spectral");
    let mut v: Vec<f64> = (0..cols).map(|_| StandardNormal.sample(&mut r)).collect();
    let n = l2(&v);
    v.iter_mut().for_each(|x| *x /= n);
    let mut prev = 0.0;
    for _ in 0..iters {
        let u: Vec<f64> = (0..rows).map(|i| dot(&a[i * cols..(i + 1) * cols], &v)).collect();
        let sigma = l2(&u);
        let mut wv = vec![0.0; cols];
        for i in 0..rows {
            for j in 0..cols {
                wv[j] += a[i * cols + j] * u[i];
            }
        }
        let wn = l2(&wv);
        if wn == 0.0 {
            // v fell into the null space
            return Err(Error::NotConverged("power iteration collapsed to zero".into()));
        }
        v = wv.into_iter().map(|x| x / wn).collect();
        if (sigma - prev).abs() <= tol * sigma {
            return Ok(sigma);
        }
        prev = sigma;
    }
    Err(Error::NotConverged(format!("spectral norm after {iters} iterations (last {prev})")))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSummary {
    pub spec_sum: f64,
    /// Product of per-layer norms, accumulated in the log domain.
    pub spec_prod: f64,
    /// (1/L)·Σ σ̂ₗ.
    pub spectral_norm_per_layer: f64,
}

pub fn spectral_summary(sigmas: &[f64]) -> Result<SpectralSummary> {
    if sigmas.is_empty() {
        return Err(invalid("no layers"));
    }
    let sum: f64 = sigmas.iter().sum();
    let log_prod: f64 = sigmas.iter().map(|s| s.ln()).sum();
    Ok(SpectralSummary { spec_sum: sum, spec_prod: log_prod.exp(), spectral_norm_per_layer: sum / sigmas.len() as f64 })
}

/// Squared path norm: propagate an all-ones input through the network with
/// every weight and bias squared and no activation, then sum the outputs.
pub fn path_norm(spec: &ModelSpec, params: &ParamVector) -> Result<f64> {
    let mut h = vec![1.0; spec.input_dim];
    for l in 0..spec.depth() {
        let w = params.segment(&format!("W{l}")).ok_or_else(|| Error::Shape(format!("missing weight W{l}")))?;
        let (rows, cols) = w.dims2()?;
        if cols != h.len() {
            return Err(Error::Shape(format!("W{l} expects width {cols}, got {}", h.len())));
        }
        let wv = w.values();
        let mut next: Vec<f64> = (0..rows).map(|i| (0..cols).map(|j| wv[i * cols + j].powi(2) * h[j]).sum()).collect();
        if let Some(b) = params.segment(&format!("b{l}")) {
            for (o, bv) in next.iter_mut().zip(b.values()) {
                *o += bv * bv;
            }
        }
        h = next;
    }
    Ok(h.iter().sum())
}
