//! Binned calibration errors and post-hoc temperature scaling.

use serde::{Deserialize, Serialize};

use crate::autodiff::{log_sum_exp, softmax, Tensor};
use crate::sandbox::argmax;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub ece: f64,
    pub mce: f64,
    pub ace: f64,
    /// Unweighted mean of |acc − conf| over non-empty equal-width bins.
    pub reliability_diagram: f64,
}

/// Equal-width bin on (0, 1] with right-closed edges: (m/M, (m+1)/M].
fn bin_index(conf: f64, bins: usize) -> usize {
    let m = (conf * bins as f64).ceil() as isize - 1;
    m.clamp(0, bins as isize - 1) as usize
}

/// ECE, MCE and reliability-diagram error from per-sample (confidence,
/// correct) pairs.
pub fn binned_errors(confidence: &[f64], correct: &[bool], bins: usize) -> (f64, f64, f64) {
    let bins = bins.max(1);
    let n = confidence.len();
    let mut count = vec![0usize; bins];
    let mut conf_sum = vec![0.0; bins];
    let mut hit_sum = vec![0.0; bins];
    for (c, ok) in confidence.iter().zip(correct) {
        let m = bin_index(*c, bins);
        count[m] += 1;
        conf_sum[m] += c;
        hit_sum[m] += if *ok { 1.0 } else { 0.0 };
    }
    let (mut ece, mut mce, mut rd, mut nonempty) = (0.0, 0.0f64, 0.0, 0usize);
    for m in 0..bins {
        if count[m] == 0 {
            continue;
        }
        let c = count[m] as f64;
        let gap = (hit_sum[m] / c - conf_sum[m] / c).abs();
        ece += c / n as f64 * gap;
        mce = mce.max(gap);
        rd += gap;
        nonempty += 1;
    }
    if nonempty > 0 {
        rd /= nonempty as f64;
    }
    (ece, mce, rd)
}

/// Adaptive calibration error: for each class, the class-k probabilities are
/// sorted (ties broken by label) and split into `bins` equal-count bins; the
/// first `N mod bins` bins take one extra sample. Empty bins contribute 0.
#[allow(clippy::needless_range_loop)]
pub fn adaptive_calibration_error(probs: &[Vec<f64>], labels: &[usize], bins: usize) -> f64 {
    let bins = bins.max(1);
    let n = labels.len();
    if n == 0 {
        return 0.0;
    }
    let k = probs[0].len();
    let (q, r) = (n / bins, n % bins);
    let mut total = 0.0;
    for class in 0..k {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| {
            probs[a][class].total_cmp(&probs[b][class]).then((labels[a] == class).cmp(&(labels[b] == class)))
        });
        let mut start = 0;
        for m in 0..bins {
            let size = q + usize::from(m < r);
            if size == 0 {
                continue;
            }
            let members = &idx[start..start + size];
            start += size;
            let conf = members.iter().map(|&i| probs[i][class]).sum::<f64>() / size as f64;
            let acc = members.iter().filter(|&&i| labels[i] == class).count() as f64 / size as f64;
            total += (acc - conf).abs();
        }
    }
    total / (k * bins) as f64
}

pub fn calibration_measures(logits: &Tensor, labels: &[usize], bins: usize) -> Calibration {
    let probs: Vec<Vec<f64>> = (0..labels.len()).map(|i| softmax(logits.row(i))).collect();
    let conf: Vec<f64> = probs.iter().map(|p| p.iter().cloned().fold(0.0, f64::max)).collect();
    let correct: Vec<bool> = (0..labels.len()).map(|i| argmax(logits.row(i)) == labels[i]).collect();
    let (ece, mce, reliability_diagram) = binned_errors(&conf, &correct, bins);
    let ace = adaptive_calibration_error(&probs, labels, bins);
    Calibration { ece, mce, ace, reliability_diagram }
}

/// Mean cross-entropy of softmax(z / T).
pub fn tempered_ce(logits: &Tensor, labels: &[usize], temperature: f64) -> f64 {
    let n = labels.len();
    let mut total = 0.0;
    let mut row = Vec::new();
    for (i, &y) in labels.iter().enumerate() {
        row.clear();
        row.extend(logits.row(i).iter().map(|z| z / temperature));
        total += log_sum_exp(&row) - row[y];
    }
    total / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureFit {
    pub temperature: f64,
    pub ce: f64,
    pub ece_after: f64,
}

pub const LOG_T_MIN: f64 = -3.0;
pub const LOG_T_MAX: f64 = 3.0;

/// Minimise mean CE over log T ∈ [−3, 3]: a 0.1-spaced grid, then golden
/// section inside the bracket around the best grid point until the bracket
/// is narrower than 1e-4 in log T. When CE is monotone the result sits on
/// the nearest search bound.
pub fn temperature_scale(logits: &Tensor, labels: &[usize], bins: usize) -> TemperatureFit {
    let ce_at = |log_t: f64| tempered_ce(logits, labels, log_t.exp());
    let steps = 60;
    let grid: Vec<f64> = (0..=steps).map(|i| (i as f64 - 30.0) / 10.0).collect();
    let vals: Vec<f64> = grid.iter().map(|&g| ce_at(g)).collect();
    let best = (0..grid.len()).fold(0, |b, i| if vals[i] < vals[b] { i } else { b });
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(steps)];
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut fa, mut fb) = (ce_at(a), ce_at(b));
    while hi - lo > 1e-4 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = ce_at(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = ce_at(b);
        }
    }
    let mut log_t = 0.5 * (lo + hi);
    let mut ce = ce_at(log_t);
    if vals[best] <= ce {
        log_t = grid[best];
        ce = vals[best];
    }
    let t = log_t.exp();
    let scaled = logits.map(|z| z / t);
    let ece_after = calibration_measures(&scaled, labels, bins).ece;
    TemperatureFit { temperature: t, ce, ece_after }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfectly_calibrated_constant_confidence() {
        let conf = vec![0.8; 10];
        let correct: Vec<bool> = (0..10).map(|i| i < 8).collect();
        let (ece, mce, rd) = binned_errors(&conf, &correct, 15);
        assert!(ece.abs() < 1e-12 && mce.abs() < 1e-12 && rd.abs() < 1e-12);
    }

    #[test]
    fn two_equal_mass_bins() {
        // bin A: conf 0.9, acc 0.8 (gap 0.1); bin B: conf 0.6, acc 0.3 (gap 0.3)
        let mut conf = vec![0.9; 10];
        conf.extend(vec![0.6; 10]);
        let mut correct: Vec<bool> = (0..10).map(|i| i < 8).collect();
        correct.extend((0..10).map(|i| i < 3));
        let (ece, mce, rd) = binned_errors(&conf, &correct, 10);
        assert!((ece - 0.2).abs() < 1e-12);
        assert!((mce - 0.3).abs() < 1e-12);
        assert!((rd - 0.2).abs() < 1e-12);
    }

    #[test]
    fn right_closed_bins() {
        assert_eq!(bin_index(0.5, 2), 0);
        assert_eq!(bin_index(0.5000001, 2), 1);
        assert_eq!(bin_index(1.0, 15), 14);
        assert_eq!(bin_index(1e-9, 15), 0);
    }

    #[test]
    fn ace_is_order_invariant() {
        let probs: Vec<Vec<f64>> = (0..17)
            .map(|i| {
                let p = (i % 5) as f64 / 5.0 + 0.1;
                vec![p, 1.0 - p]
            })
            .collect();
        let labels: Vec<usize> = (0..17).map(|i| (i * 7 % 3) % 2).collect();
        let a = adaptive_calibration_error(&probs, &labels, 4);
        let mut order: Vec<usize> = (0..17).rev().collect();
        order.swap(2, 9);
        let p2: Vec<Vec<f64>> = order.iter().map(|&i| probs[i].clone()).collect();
        let l2: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
        assert_eq!(a, adaptive_calibration_error(&p2, &l2, 4));
    }

    #[test]
    fn single_sample_temperature_hits_lower_bound() {
        let z = Tensor::matrix(1, 2, vec![2.0, 0.0]).unwrap();
        let fit = temperature_scale(&z, &[0], 15);
        assert!((fit.temperature.ln() - LOG_T_MIN).abs() < 1e-3, "{}", fit.temperature);
    }
}
