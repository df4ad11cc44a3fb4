//! Brute-force reference implementations used by the test suites.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(i, j, lo, hi)`: `lo <= x_j - x_i <= hi`.
pub type RawConstraint = (usize, usize, i64, i64);

/// A small network whose variable 0 is the origin and every other variable
/// has a narrow absolute domain, so enumeration is exhaustive.
#[derive(Debug, Clone)]
pub struct SmallNetwork {
    pub n: usize,
    pub constraints: Vec<RawConstraint>,
}

pub fn random_network(rng: &mut ChaCha8Rng) -> SmallNetwork {
    let n = rng.random_range(2..=6);
    let mut constraints = Vec::new();
    for i in 1..n {
        let lo = rng.random_range(-50..=40);
        let width = rng.random_range(0..=6);
        constraints.push((0, i, lo, lo + width));
    }
    let extra = rng.random_range(0..=2 * n);
    for _ in 0..extra {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j {
            continue;
        }
        let a = rng.random_range(-50..=50);
        let b = rng.random_range(-50..=50);
        constraints.push((i, j, a.min(b), a.max(b)));
    }
    SmallNetwork { n, constraints }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every achievable value of `x_j - x_i`, per ordered pair, over all
/// integer solutions; `None` if there is no solution.
pub fn enumerate_differences(net: &SmallNetwork) -> Option<Vec<Vec<BTreeSet<i64>>>> {
    // The first constraint from the origin bounds each variable; every
    // constraint, that one included, is checked on complete assignments.
    let mut domains: Vec<Option<(i64, i64)>> = vec![None; net.n];
    domains[0] = Some((0, 0));
    for &(i, j, lo, hi) in &net.constraints {
        if i == 0 && domains[j].is_none() {
            domains[j] = Some((lo, hi));
        }
    }
    let domains: Vec<(i64, i64)> = domains.into_iter().map(|d| d.expect("every variable is bounded")).collect();
    let mut seen = vec![vec![BTreeSet::new(); net.n]; net.n];
    let mut x = vec![0i64; net.n];
    let mut any = false;
    fn dfs(
        v: usize,
        x: &mut Vec<i64>,
        net: &SmallNetwork,
        domains: &[(i64, i64)],
        seen: &mut Vec<Vec<BTreeSet<i64>>>,
        any: &mut bool,
    ) {
        if v == net.n {
            let ok = net
                .constraints
                .iter()
                .all(|&(i, j, lo, hi)| (lo..=hi).contains(&(x[j] - x[i])));
            if ok {
                *any = true;
                for i in 0..net.n {
                    for j in 0..net.n {
                        seen[i][j].insert(x[j] - x[i]);
                    }
                }
            }
            return;
        }
        let (lo, hi) = domains[v];
        for val in lo..=hi {
            x[v] = val;
            dfs(v + 1, x, net, domains, seen, any);
        }
    }
    dfs(1, &mut x, net, &domains, &mut seen, &mut any);
    any.then_some(seen)
}

/// Two-sided Wilcoxon signed-rank p-value by enumerating all `2^n` sign
/// assignments of the mid-ranked magnitudes.
pub fn wilcoxon_enumerated(differences: &[f64]) -> f64 {
    let nz: Vec<f64> = differences.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nz.len();
    if n == 0 {
        return 1.0;
    }
    let mags: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let ranks: Vec<f64> = mags
        .iter()
        .map(|m| {
            let below = mags.iter().filter(|x| *x < m).count() as f64;
            let equal = mags.iter().filter(|x| *x == m).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = nz.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let mut le = 0u64;
    let mut ge = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|b| mask >> b & 1 == 1).map(|b| ranks[b]).sum();
        if w <= observed + 1e-9 {
            le += 1;
        }
        if w >= observed - 1e-9 {
            ge += 1;
        }
    }
    let total = (1u64 << n) as f64;
    (2.0 * le.min(ge) as f64 / total).min(1.0)
}

/// Maximum one-to-one matching within `tol` by augmenting paths.
pub fn max_matching(test: &[i64], reference: &[i64], tol: i64) -> u64 {
    fn augment(t: usize, test: &[i64], reference: &[i64], tol: i64, owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
        for r in 0..reference.len() {
            if (test[t] - reference[r]).abs() <= tol && !seen[r] {
                seen[r] = true;
                if owner[r].is_none_or(|o| augment(o, test, reference, tol, owner, seen)) {
                    owner[r] = Some(t);
                    return true;
                }
            }
        }
        false
    }
    let mut owner = vec![None; reference.len()];
    let mut count = 0;
    for t in 0..test.len() {
        let mut seen = vec![false; reference.len()];
        if augment(t, test, reference, tol, &mut owner, &mut seen) {
            count += 1;
        }
    }
    count
}
