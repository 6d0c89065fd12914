//! Loss increases under gradient-aligned and random perturbations.

use rand_distr::{Distribution, StandardNormal};

use super::Aggregate;
use crate::autodiff::{axpy, l2, Objective, ParamVector};
use crate::error::{invalid, Error, Result};
use crate::rng::Stream;

/// Gradients with norm below this give no usable ascent direction.
pub const DEGENERATE_GRAD: f64 = 1e-12;

pub const EPS_SCALE: f64 = 1e-3;

/// Mean over batches of L_b(θ + ρ·u_b) − L_b(θ) with u_b = ∇L_b/‖∇L_b‖.
///
/// Batches whose gradient norm is below [`DEGENERATE_GRAD`] contribute 0.
/// Batches whose loss or gradient is non-finite are skipped; if every batch
/// is skipped the estimate fails.
pub fn sam_sharpness(batches: &[&dyn Objective], theta: &[f64], rho: f64) -> Result<f64> {
    if rho.is_nan() || rho <= 0.0 {
        return Err(invalid(format!("sharpness radius {rho} must be > 0")));
    }
    if batches.is_empty() {
        return Err(invalid("sharpness needs at least one batch"));
    }
    let mut total = 0.0;
    let mut used = 0usize;
    for obj in batches {
        let Ok((base, g)) = obj.loss_and_grad(theta) else { continue };
        let gn = l2(&g);
        if !gn.is_finite() || !base.is_finite() {
            continue;
        }
        used += 1;
        if gn < DEGENERATE_GRAD {
            continue;
        }
        let moved = axpy(rho / gn, &g, theta);
        match obj.loss(&moved) {
            Ok(l) if l.is_finite() => total += l - base,
            _ => used -= 1,
        }
    }
    if used == 0 {
        return Err(Error::NonFinite("every sharpness batch".into()));
    }
    Ok(total / used as f64)
}

/// max_k sharpness(ρ_k)/ρ_k over the radii that succeed.
pub fn adaptive_sharpness(batches: &[&dyn Objective], theta: &[f64], radii: &[f64]) -> Result<f64> {
    let mut best: Option<f64> = None;
    let mut last_err = None;
    for &r in radii {
        match sam_sharpness(batches, theta, r) {
            Ok(s) => best = Some(best.map_or(s / r, |b: f64| b.max(s / r))),
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| invalid("no radii given")))
}

/// `k` radii spaced evenly in log between `lo` and `hi`.
pub fn log_spaced(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..k).map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseShape {
    /// Per-tensor N(0, (r·std(p))²).
    TensorStd,
    /// r·z⊙(|θ| + ε_scale).
    Magnitude,
}

/// One perturbation draw of the given shape.
pub fn noise_draw(shape: NoiseShape, params: &ParamVector, r: f64, rng: &mut Stream) -> Vec<f64> {
    let mut out = Vec::with_capacity(params.dim());
    for (_, t) in params.segments() {
        let scale = match shape {
            NoiseShape::TensorStd => r * population_std(t.values()),
            NoiseShape::Magnitude => r,
        };
        for &v in t.values() {
            let z: f64 = StandardNormal.sample(rng);
            out.push(match shape {
                NoiseShape::TensorStd => scale * z,
                NoiseShape::Magnitude => scale * z * (v.abs() + EPS_SCALE),
            });
        }
    }
    out
}

pub fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSharpness {
    pub raw: f64,
    pub discarded: usize,
}

/// Aggregate of L(θ+Δθ_k) − L(θ) over `samples` draws. Draws with a
/// non-finite perturbed loss are discarded.
pub fn noise_sharpness(
    obj: &dyn Objective,
    params: &ParamVector,
    shape: NoiseShape,
    r: f64,
    samples: usize,
    agg: Aggregate,
    rng: &mut Stream,
) -> Result<NoiseSharpness> {
    if samples == 0 {
        return Err(invalid("noise sharpness needs samples ≥ 1"));
    }
    if r.is_nan() || r < 0.0 {
        return Err(invalid(format!("noise radius {r} must be ≥ 0")));
    }
    let theta = params.flatten();
    let base = obj.loss(&theta)?;
    let mut deltas = Vec::with_capacity(samples);
    for _ in 0..samples {
        let d = noise_draw(shape, params, r, rng);
        let moved: Vec<f64> = theta.iter().zip(&d).map(|(t, x)| t + x).collect();
        if let Ok(l) = obj.loss(&moved) {
            if l.is_finite() {
                deltas.push(l - base);
            }
        }
    }
    if deltas.is_empty() {
        return Err(Error::NonFinite("every perturbed loss".into()));
    }
    Ok(NoiseSharpness { raw: agg.apply(&deltas), discarded: samples - deltas.len() })
}

/// ‖θ‖₂/√d.
pub fn magnitude_factor(theta: &[f64]) -> f64 {
    l2(theta) / (theta.len() as f64).sqrt()
}

/// ‖θ−θ₀‖₂/√d.
pub fn init_magnitude_factor(theta: &[f64], theta0: &[f64]) -> f64 {
    let d: Vec<f64> = theta.iter().zip(theta0).map(|(a, b)| a - b).collect();
    magnitude_factor(&d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Quadratic, Tensor};
    use crate::rng;

    #[test]
    fn one_dimensional_quadratic_closed_form() {
        let a = 2.0;
        let q = Quadratic::diagonal(&[a]);
        let s = sam_sharpness(&[&q], &[1.0], 0.1).unwrap();
        assert!((s - a * (0.1 + 0.005)).abs() < 1e-12);
    }

    #[test]
    fn minimum_gives_zero() {
        let q = Quadratic::diagonal(&[3.0, 1.0]);
        assert_eq!(sam_sharpness(&[&q, &q], &[0.0, 0.0], 0.05).unwrap(), 0.0);
    }

    #[test]
    fn vanishing_radius() {
        let q = Quadratic::diagonal(&[2.0]);
        assert!(sam_sharpness(&[&q], &[1.0], 1e-6).unwrap().abs() < 1e-4);
    }

    #[test]
    fn adaptive_is_max_ratio() {
        let a = 2.0;
        let q = Quadratic::diagonal(&[a]);
        let v = adaptive_sharpness(&[&q], &[1.0], &[0.1, 0.2]).unwrap();
        let want = f64::max(a * (0.1 + 0.005) / 0.1, a * (0.2 + 0.02) / 0.2);
        assert!((v - want).abs() < 1e-12);
    }

    #[test]
    fn log_spacing_endpoints() {
        let r = log_spaced(1e-3, 1e-1, 5);
        assert!((r[0] - 1e-3).abs() < 1e-15 && (r[4] - 1e-1).abs() < 1e-15);
        assert!((r[2] - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn zero_radius_noise_is_zero() {
        let q = Quadratic::diagonal(&[1.0, 4.0]);
        let p = ParamVector::new(vec![("w".into(), Tensor::new(vec![2], vec![0.3, -0.7]).unwrap())]).unwrap();
        for shape in [NoiseShape::TensorStd, NoiseShape::Magnitude] {
            let mut r = rng::labeled_stream(1, "t");
            let s = noise_sharpness(&q, &p, shape, 0.0, 3, Aggregate::Max, &mut r).unwrap();
            assert_eq!(s.raw, 0.0);
        }
    }

    #[test]
    fn seeded_draw_replay() {
        let q = Quadratic::diagonal(&[2.0]);
        let p = ParamVector::new(vec![("w".into(), Tensor::new(vec![1], vec![1.0]).unwrap())]).unwrap();
        let mut r = rng::labeled_stream(9, "replay");
        let s = noise_sharpness(&q, &p, NoiseShape::Magnitude, 0.1, 1, Aggregate::Max, &mut r).unwrap();
        let mut r2 = rng::labeled_stream(9, "replay");
        let z: f64 = StandardNormal.sample(&mut r2);
        let t = 1.0 + 0.1 * z * (1.0 + EPS_SCALE);
        assert!((s.raw - (t * t - 1.0)).abs() < 1e-12);
    }
}
