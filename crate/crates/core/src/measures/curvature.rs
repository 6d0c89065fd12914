//! Hessian and Fisher based curvature summaries.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Aggregate;
use crate::autodiff::{dot, hvp, l2, HvpMethod, Objective};
use crate::error::{invalid, Error, Result};
use crate::rng::Stream;

/// agg_i(F_i + λ) with F_i the mean squared batch gradient of coordinate i.
pub fn flatness_proxy(batch_grads: &[Vec<f64>], lambda: f64, agg: Aggregate) -> Result<f64> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(invalid(format!("flatness prior precision {lambda} must be > 0")));
    }
    let b = batch_grads.len();
    if b == 0 {
        return Err(invalid("flatness proxy needs at least one batch"));
    }
    let d = batch_grads[0].len();
    let pi: Vec<f64> =
        (0..d).map(|i| batch_grads.iter().map(|g| g[i] * g[i]).sum::<f64>() / b as f64 + lambda).collect();
    Ok(agg.apply(&pi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIteration {
    pub iters: usize,
    pub tol: f64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self { iters: 100, tol: 1e-6 }
    }
}

/// Rayleigh quotient vᵀHv after power iteration on H, i.e. the eigenvalue of
/// largest magnitude with its sign. Fails if successive estimates never come
/// within `tol` of each other.
pub fn hessian_top_eigenvalue(obj: &dyn Objective, theta: &[f64], pi: PowerIteration, rng: &mut Stream) -> Result<f64> {
    if pi.iters == 0 {
        return Err(invalid("power iteration needs iters ≥ 1"));
    }
    let mut v: Vec<f64> = (0..theta.len()).map(|_| StandardNormal.sample(rng)).collect();
    let n = l2(&v);
    v.iter_mut().for_each(|x| *x /= n);
    let mut prev: Option<f64> = None;
    for _ in 0..pi.iters {
        let hv = hvp(obj, theta, &v, HvpMethod::FdCentral)?;
        let lambda = dot(&v, &hv);
        if prev.is_some_and(|p| (lambda - p).abs() < pi.tol) {
            return Ok(lambda);
        }
        let hn = l2(&hv);
        if hn == 0.0 {
            return Ok(0.0);
        }
        v = hv.into_iter().map(|x| x / hn).collect();
        prev = Some(lambda);
    }
    Err(Error::NotConverged(format!(
        "hessian power iteration after {} iterations (last {})",
        pi.iters,
        prev.unwrap_or(f64::NAN)
    )))
}

fn rademacher(d: usize, rng: &mut Stream) -> Vec<f64> {
    (0..d).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// Hutchinson estimate (1/S)·Σ vₛᵀHvₛ with Rademacher vₛ.
pub fn hessian_trace(obj: &dyn Objective, theta: &[f64], samples: usize, rng: &mut Stream) -> Result<f64> {
    if samples == 0 {
        return Err(invalid("Hutchinson estimator needs S ≥ 1"));
    }
    let mut total = 0.0;
    for _ in 0..samples {
        let v = rademacher(theta.len(), rng);
        total += dot(&v, &hvp(obj, theta, &v, HvpMethod::FdCentral)?);
    }
    Ok(total / samples as f64)
}

/// diag(H). Exact column-by-column for `d ≤ exact_limit`, otherwise the
/// Hutchinson estimate mean_s vₛ⊙Hvₛ.
pub fn hessian_diagonal(
    obj: &dyn Objective,
    theta: &[f64],
    exact_limit: usize,
    samples: usize,
    rng: &mut Stream,
) -> Result<Vec<f64>> {
    let d = theta.len();
    if d <= exact_limit {
        let mut e = vec![0.0; d];
        let mut out = Vec::with_capacity(d);
        for i in 0..d {
            e[i] = 1.0;
            out.push(hvp(obj, theta, &e, HvpMethod::FdCentral)?[i]);
            e[i] = 0.0;
        }
        return Ok(out);
    }
    if samples == 0 {
        return Err(invalid("diagonal estimate needs S ≥ 1"));
    }
    let mut acc = vec![0.0; d];
    for _ in 0..samples {
        let v = rademacher(d, rng);
        let hv = hvp(obj, theta, &v, HvpMethod::FdCentral)?;
        for i in 0..d {
            acc[i] += v[i] * hv[i];
        }
    }
    Ok(acc.into_iter().map(|x| x / samples as f64).collect())
}
