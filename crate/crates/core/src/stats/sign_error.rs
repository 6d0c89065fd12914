//! Environment-level sign error between measure and gap orderings.

use std::collections::BTreeMap;

use super::{lower_percentile, sign, Row, Table};

/// Two hyperparameter combos (seed excluded) that differ in exactly one
/// axis, with the row indices of the runs in each.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub axis: String,
    pub combo_a: Vec<String>,
    pub combo_b: Vec<String>,
    pub runs_a: Vec<usize>,
    pub runs_b: Vec<usize>,
}

/// Environments of `table`, in combo order.
pub fn environments(table: &Table, seed_axis: &str) -> Vec<Environment> {
    let keep: Vec<usize> = (0..table.axes.len()).filter(|&k| table.axes[k] != seed_axis).collect();
    let mut combos: BTreeMap<Vec<String>, Vec<usize>> = BTreeMap::new();
    for (i, r) in table.rows.iter().enumerate() {
        combos.entry(keep.iter().map(|&k| r.tokens[k].clone()).collect()).or_default().push(i);
    }
    let list: Vec<(&Vec<String>, &Vec<usize>)> = combos.iter().collect();
    let mut out = Vec::new();
    for a in 0..list.len() {
        for b in a + 1..list.len() {
            let diff: Vec<usize> = (0..keep.len()).filter(|&k| list[a].0[k] != list[b].0[k]).collect();
            if diff.len() == 1 {
                out.push(Environment {
                    axis: table.axes[keep[diff[0]]].clone(),
                    combo_a: list[a].0.clone(),
                    combo_b: list[b].0.clone(),
                    runs_a: list[a].1.clone(),
                    runs_b: list[b].1.clone(),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvSignError {
    pub se: f64,
    pub n_eff: f64,
    pub pairs: usize,
}

/// Σw·ℓ/Σw over cross-combo pairs with ℓ = (1 − sign(Δμ)·sign(Δg))/2.
/// Returns `None` when there are no pairs or the weights sum to zero.
pub fn sign_error_environment(
    table: &Table,
    env: &Environment,
    weight: &(dyn Fn(&Row, &Row) -> f64 + Sync),
) -> Option<EnvSignError> {
    let (mut sw, mut sw2, mut swl, mut pairs) = (0.0, 0.0, 0.0, 0usize);
    for &i in &env.runs_a {
        for &j in &env.runs_b {
            let (ri, rj) = (&table.rows[i], &table.rows[j]);
            let w = weight(ri, rj);
            let l = f64::from(1 - sign(ri.mu - rj.mu) * sign(ri.g - rj.g)) / 2.0;
            sw += w;
            sw2 += w * w;
            swl += w * l;
            pairs += 1;
        }
    }
    (pairs > 0 && sw > 0.0).then(|| EnvSignError { se: swl / sw, n_eff: sw * sw / sw2, pairs })
}

pub fn uniform_weight(_: &Row, _: &Row) -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignErrorSummary {
    /// SE of every environment that passed the n_eff filter.
    pub values: Vec<f64>,
    pub mean: Option<f64>,
    pub p90: Option<f64>,
    pub max: Option<f64>,
    pub n_env: usize,
    pub n_filtered: usize,
}

impl SignErrorSummary {
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn sign_error_distribution(
    table: &Table,
    seed_axis: &str,
    n_eff_threshold: f64,
    weight: &(dyn Fn(&Row, &Row) -> f64 + Sync),
) -> SignErrorSummary {
    let mut values = Vec::new();
    let mut n_filtered = 0;
    for env in environments(table, seed_axis) {
        match sign_error_environment(table, &env, weight) {
            Some(e) if e.n_eff >= n_eff_threshold => values.push(e.se),
            _ => n_filtered += 1,
        }
    }
    summarize(values, n_filtered)
}

pub fn summarize(values: Vec<f64>, n_filtered: usize) -> SignErrorSummary {
    let mean = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
    let max = values.iter().cloned().reduce(f64::max);
    SignErrorSummary { p90: lower_percentile(&values, 0.9), mean, max, n_env: values.len(), n_filtered, values }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_combo(mu_sign: f64) -> Table {
        let mut t = Table::new(vec!["lr".into(), "seed".into()]);
        for (k, lr) in ["a", "b"].iter().enumerate() {
            for s in 0..3 {
                let g = (k * 3 + s) as f64 + 0.1 * s as f64;
                t.push(vec![(*lr).into(), s.to_string()], mu_sign * g, g).unwrap();
            }
        }
        t
    }

    #[test]
    fn concordant_and_negated() {
        let env = &environments(&two_combo(1.0), "seed")[0];
        let e = sign_error_environment(&two_combo(1.0), env, &uniform_weight).unwrap();
        assert_eq!(e.se, 0.0);
        assert_eq!(e.pairs, 9);
        assert_eq!(e.n_eff, 9.0);
        let e = sign_error_environment(&two_combo(-1.0), env, &uniform_weight).unwrap();
        assert_eq!(e.se, 1.0);
    }

    #[test]
    fn environments_differ_in_one_axis() {
        let mut t = Table::new(vec!["lr".into(), "wd".into(), "seed".into()]);
        for lr in ["1", "2"] {
            for wd in ["x", "y"] {
                t.push(vec![lr.into(), wd.into(), "0".into()], 0.0, 0.0).unwrap();
            }
        }
        let envs = environments(&t, "seed");
        // 4 combos on a 2×2 square: 4 edges, the 2 diagonals are excluded
        assert_eq!(envs.len(), 4);
        assert!(envs.iter().all(|e| e.combo_a.iter().zip(&e.combo_b).filter(|(a, b)| a != b).count() == 1));
    }

    #[test]
    fn summary_arithmetic() {
        let s = summarize(vec![0.0, 0.0, 1.0], 0);
        assert!((s.mean.unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.max, Some(1.0));
        let s = summarize(vec![0.25], 2);
        assert_eq!((s.mean, s.p90, s.max), (Some(0.25), Some(0.25), Some(0.25)));
    }

    #[test]
    fn threshold_filters_everything() {
        let s = sign_error_distribution(&two_combo(1.0), "seed", 100.0, &uniform_weight);
        assert!(s.is_empty());
        assert_eq!(s.n_filtered, 1);
        assert_eq!(s.mean, None);
    }
}
