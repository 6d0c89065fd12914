//! McAllester-style PAC-Bayes bounds with diagonal Gaussian posteriors.

use rand_distr::{Distribution, StandardNormal};

use super::sharpness::population_std;
use crate::autodiff::ParamVector;
use crate::error::{invalid, Result};
use crate::rng::Stream;

/// Floor for posterior standard deviations so the KL term stays finite.
pub const EPS_VAR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacBayesVariant {
    /// σ_q = σ_post for every coordinate, prior at 0.
    Bound,
    /// σ_q,i = σ_post·std(tensor of i), prior at 0.
    Magnitude,
    /// As `Magnitude` with the prior centred at θ₀.
    MagnitudeInit,
    /// σ_q,i = σ_post·|θ_i|, prior at 0.
    Magflat,
}

/// KL(N(μ, diag σ_q²) ‖ N(μ_p, σ_p² I)).
pub fn kl_diag_gaussian(mu: &[f64], prior_mean: &[f64], sigma_q: &[f64], sigma_p: f64) -> f64 {
    let vp = sigma_p * sigma_p;
    0.5 * mu
        .iter()
        .zip(prior_mean)
        .zip(sigma_q)
        .map(|((m, m0), s)| {
            let r = s * s / vp;
            (m - m0).powi(2) / vp + r - 1.0 - r.ln()
        })
        .sum::<f64>()
}

/// R̂ + sqrt((KL + ln(2√n/δ)) / 2n).
pub fn mcallester(risk: f64, kl: f64, n: usize, delta: f64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("PAC-Bayes bound needs n ≥ 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("δ = {delta} outside (0, 1)")));
    }
    let n = n as f64;
    let slack = ((kl + (2.0 * n.sqrt() / delta).ln()) / (2.0 * n)).max(0.0);
    Ok(risk + slack.sqrt())
}

/// Per-coordinate posterior standard deviations, floored at [`EPS_VAR`].
pub fn posterior_scales(variant: PacBayesVariant, params: &ParamVector, sigma_post: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(params.dim());
    for (_, t) in params.segments() {
        let tensor_std = population_std(t.values());
        for &v in t.values() {
            let s = match variant {
                PacBayesVariant::Bound => sigma_post,
                PacBayesVariant::Magnitude | PacBayesVariant::MagnitudeInit => sigma_post * tensor_std,
                PacBayesVariant::Magflat => sigma_post * v.abs(),
            };
            out.push(s.max(EPS_VAR));
        }
    }
    out
}

/// One posterior sample θ'. `Magflat` uses θ⊙(1 + σ_post·ε); the other
/// variants add σ_q⊙ε.
pub fn posterior_draw(
    variant: PacBayesVariant,
    theta: &[f64],
    scales: &[f64],
    sigma_post: f64,
    rng: &mut Stream,
) -> Vec<f64> {
    theta
        .iter()
        .zip(scales)
        .map(|(&t, &s)| {
            let e: f64 = StandardNormal.sample(rng);
            match variant {
                PacBayesVariant::Magflat => t * (1.0 + sigma_post * e),
                _ => t + s * e,
            }
        })
        .collect()
}
