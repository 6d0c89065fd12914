//! Conditional mutual information between ternary pairwise sign variables.

use std::collections::HashMap;

use rand::seq::index;

use super::{sign, Table};
use crate::rng;

/// Ordered pairs (i, j), i ≠ j, over `n` items in lexicographic order. When
/// there are more than `cap`, a uniform subsample of `cap` pairs drawn with
/// `seed` is returned, still in lexicographic order.
pub fn ordered_pairs(n: usize, cap: usize, seed: u64) -> Vec<(usize, usize)> {
    if n < 2 {
        return Vec::new();
    }
    let total = n * (n - 1);
    let decode = |k: usize| {
        let i = k / (n - 1);
        let r = k % (n - 1);
        (i, if r < i { r } else { r + 1 })
    };
    if total <= cap {
        return (0..total).map(decode).collect();
    }
    let mut r = rng::labeled_stream(seed, "pairs");
    let mut picked = index::sample(&mut r, total, cap).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(decode).collect()
}

/// sign(a_i − a_j) for every pair.
pub fn sign_pairs(a: &[f64], pairs: &[(usize, usize)]) -> Vec<i8> {
    pairs.iter().map(|&(i, j)| sign(a[i] - a[j])).collect()
}

fn conditional_entropy(counts: &HashMap<(u32, i8), usize>, margin: &HashMap<u32, usize>, total: f64) -> f64 {
    // −Σ p(y,z)·ln(p(y,z)/p(z)) accumulated in a fixed key order
    let mut keys: Vec<&(u32, i8)> = counts.keys().collect();
    keys.sort_unstable();
    keys.into_iter()
        .map(|k| {
            let c = counts[k] as f64;
            let cz = margin[&k.0] as f64;
            -(c / total) * (c / cz).ln()
        })
        .sum()
}

/// I(V_μ; V_g | Z)/H(V_g | Z) from empirical counts, natural log, clamped
/// to [0, 1]. `None` when H(V_g | Z) = 0.
pub fn ncmi(v_mu: &[i8], v_g: &[i8], z: &[u32]) -> Option<f64> {
    let n = v_g.len();
    if n == 0 {
        return None;
    }
    let total = n as f64;
    let mut yz: HashMap<(u32, i8), usize> = HashMap::new();
    let mut zc: HashMap<u32, usize> = HashMap::new();
    let mut yxz: HashMap<(u32, i8), usize> = HashMap::new();
    let mut xz: HashMap<u32, usize> = HashMap::new();
    for k in 0..n {
        *yz.entry((z[k], v_g[k])).or_default() += 1;
        *zc.entry(z[k]).or_default() += 1;
        // (x, z) packed into one stratum id: 3 sign values per z
        let xzid = z[k] * 3 + (v_mu[k] + 1) as u32;
        *yxz.entry((xzid, v_g[k])).or_default() += 1;
        *xz.entry(xzid).or_default() += 1;
    }
    let h_y_z = conditional_entropy(&yz, &zc, total);
    if h_y_z <= 0.0 {
        return None;
    }
    let h_y_xz = conditional_entropy(&yxz, &xz, total);
    Some(((h_y_z - h_y_xz) / h_y_z).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmiResult {
    pub k: f64,
    /// Conditioning axes attaining the minimum; empty for the unconditioned
    /// estimate.
    pub argmin: Vec<String>,
    /// Subsets skipped because H(V_g | U_S) = 0.
    pub degenerate: Vec<Vec<String>>,
}

fn subsets(m: usize, d: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..d.min(m) {
        let mut next = Vec::new();
        for s in &frontier {
            let start = s.last().map_or(0, |&l: &usize| l + 1);
            for k in start..m {
                let mut t = s.clone();
                t.push(k);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// K(μ) = min over subsets S ⊆ `axes`, |S| ≤ `depth`, of NCMI conditioned on
/// the paired tokens of S. `None` when every subset is degenerate.
pub fn cmi_score(table: &Table, axes: &[String], depth: usize, pair_cap: usize, seed: u64) -> Option<CmiResult> {
    let pairs = ordered_pairs(table.len(), pair_cap, seed);
    let mu: Vec<f64> = table.rows.iter().map(|r| r.mu).collect();
    let g: Vec<f64> = table.rows.iter().map(|r| r.g).collect();
    let v_mu = sign_pairs(&mu, &pairs);
    let v_g = sign_pairs(&g, &pairs);
    let cols: Vec<usize> = axes.iter().filter_map(|a| table.axis_index(a)).collect();
    // token ids per usable axis
    let ids: Vec<Vec<u32>> = cols
        .iter()
        .map(|&c| {
            let mut seen: HashMap<&str, u32> = HashMap::new();
            table
                .rows
                .iter()
                .map(|r| {
                    let next = seen.len() as u32;
                    *seen.entry(r.tokens[c].as_str()).or_insert(next)
                })
                .collect()
        })
        .collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut degenerate = Vec::new();
    for s in subsets(cols.len(), depth) {
        let mut strata: HashMap<Vec<u32>, u32> = HashMap::new();
        let z: Vec<u32> = pairs
            .iter()
            .map(|&(i, j)| {
                let key: Vec<u32> = s.iter().flat_map(|&a| [ids[a][i], ids[a][j]]).collect();
                let next = strata.len() as u32;
                *strata.entry(key).or_insert(next)
            })
            .collect();
        match ncmi(&v_mu, &v_g, &z) {
            Some(v) => {
                if best.as_ref().is_none_or(|(b, _)| v < *b) {
                    best = Some((v, s));
                }
            }
            None => degenerate.push(s.iter().map(|&a| table.axes[cols[a]].clone()).collect()),
        }
    }
    best.map(|(k, s)| CmiResult { k, argmin: s.iter().map(|&a| table.axes[cols[a]].clone()).collect(), degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn pair_enumeration() {
        let p = ordered_pairs(3, 100, 0);
        assert_eq!(p, vec![(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]);
        let capped = ordered_pairs(100, 500, 7);
        assert_eq!(capped.len(), 500);
        assert_eq!(capped, ordered_pairs(100, 500, 7));
        assert!(capped.iter().all(|(i, j)| i != j));
    }

    #[test]
    fn sign_series() {
        let pairs: Vec<(usize, usize)> = ordered_pairs(4, 100, 0).into_iter().filter(|(i, j)| i < j).collect();
        assert!(sign_pairs(&[1.0, 2.0, 3.0, 4.0], &pairs).iter().all(|&s| s == -1));
        assert!(sign_pairs(&[5.0; 4], &pairs).iter().all(|&s| s == 0));
    }

    #[test]
    fn identical_series_have_ncmi_one() {
        let v: Vec<i8> = (0..300).map(|k| [(-1i8), 0, 1][k % 3]).collect();
        assert_eq!(ncmi(&v, &v, &vec![0; 300]), Some(1.0));
    }

    #[test]
    fn constant_mu_has_zero_information() {
        let g: Vec<i8> = (0..100).map(|k| if k % 2 == 0 { 1 } else { -1 }).collect();
        assert_eq!(ncmi(&[1; 100], &g, &[0; 100]), Some(0.0));
        assert_eq!(ncmi(&g, &[1; 100], &[0; 100]), None);
    }

    #[test]
    fn independent_series_near_zero() {
        let mut r = rng::labeled_stream(3, "indep");
        let a: Vec<i8> = (0..10_000).map(|_| r.random_range(-1..=1)).collect();
        let b: Vec<i8> = (0..10_000).map(|_| r.random_range(-1..=1)).collect();
        assert!(ncmi(&a, &b, &vec![0; 10_000]).unwrap() <= 0.05);
    }

    #[test]
    fn subset_enumeration() {
        assert_eq!(subsets(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(subsets(3, 2).len(), 1 + 3 + 3);
        assert_eq!(subsets(2, 5).len(), 4);
    }
}
