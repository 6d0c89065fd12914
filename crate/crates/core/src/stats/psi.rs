//! Granulated Kendall score over one-axis subspaces.

use std::collections::BTreeMap;

use super::{kendall_tau, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiMode {
    /// Subspaces fix every other axis, seed included.
    #[default]
    Standard,
    /// Subspaces fix every other non-seed axis; τ is computed separately for
    /// each seed inside a subspace and averaged.
    SeedConditional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiResult {
    /// Mean subspace τ per requested axis; `None` when the axis has no
    /// subspace with at least two members.
    pub per_axis: Vec<(String, Option<f64>)>,
    /// Mean of the present per-axis values.
    pub psi: Option<f64>,
}

fn tau_of(table: &Table, idx: &[usize]) -> Option<f64> {
    let x: Vec<f64> = idx.iter().map(|&i| table.rows[i].mu).collect();
    let y: Vec<f64> = idx.iter().map(|&i| table.rows[i].g).collect();
    kendall_tau(&x, &y).ok()
}

fn axis_mean(table: &Table, axis: usize, seed_axis: Option<usize>, mode: PsiMode) -> Option<f64> {
    let mut groups: BTreeMap<Vec<&str>, Vec<usize>> = BTreeMap::new();
    for (i, r) in table.rows.iter().enumerate() {
        let key = r
            .tokens
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != axis && !(mode == PsiMode::SeedConditional && Some(*k) == seed_axis))
            .map(|(_, t)| t.as_str())
            .collect();
        groups.entry(key).or_default().push(i);
    }
    let mut taus = Vec::new();
    for members in groups.values() {
        match (mode, seed_axis) {
            (PsiMode::SeedConditional, Some(sa)) => {
                let mut by_seed: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
                for &i in members {
                    by_seed.entry(table.rows[i].tokens[sa].as_str()).or_default().push(i);
                }
                let per: Vec<f64> =
                    by_seed.values().filter(|m| m.len() >= 2).filter_map(|m| tau_of(table, m)).collect();
                if !per.is_empty() {
                    taus.push(per.iter().sum::<f64>() / per.len() as f64);
                }
            }
            _ => {
                if members.len() >= 2 {
                    taus.extend(tau_of(table, members));
                }
            }
        }
    }
    (!taus.is_empty()).then(|| taus.iter().sum::<f64>() / taus.len() as f64)
}

/// Ψ over `axes`. Axes missing from the table are reported absent.
pub fn granulated_psi(table: &Table, axes: &[String], seed_axis: &str, mode: PsiMode) -> PsiResult {
    let sa = table.axis_index(seed_axis);
    let per_axis: Vec<(String, Option<f64>)> =
        axes.iter().map(|a| (a.clone(), table.axis_index(a).and_then(|ai| axis_mean(table, ai, sa, mode)))).collect();
    let present: Vec<f64> = per_axis.iter().filter_map(|(_, v)| *v).collect();
    let psi = (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
    PsiResult { per_axis, psi }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(mu: impl Fn(f64) -> f64) -> Table {
        let mut t = Table::new(vec!["lr".into(), "wd".into(), "seed".into()]);
        let mut g = 0.0;
        for lr in ["a", "b", "c"] {
            for wd in ["x", "y"] {
                for seed in ["0", "1"] {
                    g += 1.0 + (g * 7.3f64).sin().abs();
                    t.push(vec![lr.into(), wd.into(), seed.into()], mu(g), g).unwrap();
                }
            }
        }
        t
    }

    #[test]
    fn planted_identity_and_negation() {
        let axes = vec!["lr".to_string(), "wd".to_string()];
        for mode in [PsiMode::Standard, PsiMode::SeedConditional] {
            assert_eq!(granulated_psi(&grid(|g| g), &axes, "seed", mode).psi, Some(1.0));
            assert_eq!(granulated_psi(&grid(|g| -g), &axes, "seed", mode).psi, Some(-1.0));
        }
    }

    #[test]
    fn two_by_two_hand_computed() {
        // lr ∈ {a,b}, wd ∈ {c,d}; one run each.
        let mut t = Table::new(vec!["lr".into(), "wd".into()]);
        t.push(vec!["a".into(), "c".into()], 1.0, 1.0).unwrap();
        t.push(vec!["a".into(), "d".into()], 2.0, 0.0).unwrap();
        t.push(vec!["b".into(), "c".into()], 3.0, 2.0).unwrap();
        t.push(vec!["b".into(), "d".into()], 0.0, 3.0).unwrap();
        // lr subspaces: wd=c {(1,1),(3,2)} → +1; wd=d {(2,0),(0,3)} → −1; mean 0
        // wd subspaces: lr=a {(1,1),(2,0)} → −1; lr=b {(3,2),(0,3)} → −1; mean −1
        let r = granulated_psi(&t, &["lr".into(), "wd".into()], "seed", PsiMode::Standard);
        assert_eq!(r.per_axis[0].1, Some(0.0));
        assert_eq!(r.per_axis[1].1, Some(-1.0));
        assert_eq!(r.psi, Some(-0.5));
    }

    #[test]
    fn missing_axis_is_absent() {
        let r = granulated_psi(&grid(|g| g), &["depth".into(), "lr".into()], "seed", PsiMode::Standard);
        assert_eq!(r.per_axis[0].1, None);
        assert_eq!(r.psi, Some(1.0));
    }
}
