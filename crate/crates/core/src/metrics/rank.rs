//! Rank statistics: average ranks, Kendall's tau-b and its significance.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest length for which the p-value enumerates every permutation.
pub const EXACT_PERMUTATION_MAX: usize = 8;

/// Ranks with 1 for the largest value; tied values share their average rank.
pub fn ranks_descending(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KendallTau {
    pub tau: f64,
    pub p_value: f64,
}

/// Pair counts behind tau-b.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PairCounts {
    /// Concordant minus discordant pairs.
    s: i64,
    pairs: i64,
    ties_a: i64,
    ties_b: i64,
}

impl PairCounts {
    fn tau_b(&self) -> Option<f64> {
        let denom = ((self.pairs - self.ties_a) as f64 * (self.pairs - self.ties_b) as f64).sqrt();
        (denom > 0.0).then(|| (self.s as f64 / denom).clamp(-1.0, 1.0))
    }
}

fn tie_pairs(sorted: &[f64]) -> i64 {
    let mut total = 0;
    let mut run = 1i64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `v` in place, returning the number of inversions (strict).
fn merge_count(v: &mut [f64], buf: &mut Vec<f64>) -> i64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as i64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// O(n log n) pair counting by sorting on `a` and counting inversions in `b`.
fn pair_counts(a: &[f64], b: &[f64]) -> PairCounts {
    let n = a.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i].total_cmp(&a[j]).then(b[i].total_cmp(&b[j])));
    let sa: Vec<f64> = order.iter().map(|&i| a[i]).collect();
    let mut sb: Vec<f64> = order.iter().map(|&i| b[i]).collect();

    let ties_a = tie_pairs(&sa);
    let mut joint = 0i64;
    let mut run = 1i64;
    for k in 1..n {
        if sa[k] == sa[k - 1] && sb[k] == sb[k - 1] {
            run += 1;
        } else {
            joint += run * (run - 1) / 2;
            run = 1;
        }
    }
    joint += run * (run - 1) / 2;

    let swaps = merge_count(&mut sb, &mut Vec::with_capacity(n));
    let ties_b = tie_pairs(&sb);
    let pairs = (n as i64) * (n as i64 - 1) / 2;
    PairCounts {
        s: pairs - ties_a - ties_b + joint - 2 * swaps,
        pairs,
        ties_a,
        ties_b,
    }
}

fn tie_sums(sorted: &[f64]) -> (f64, f64, f64) {
    let (mut v, mut t1, mut t2) = (0.0, 0.0, 0.0);
    let mut push = |t: f64| {
        v += t * (t - 1.0) * (2.0 * t + 5.0);
        t1 += t * (t - 1.0);
        t2 += t * (t - 1.0) * (t - 2.0);
    };
    let mut run = 1.0;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1.0;
        } else {
            push(run);
            run = 1.0;
        }
    }
    push(run);
    (v, t1, t2)
}

fn normal_p_value(a: &[f64], b: &[f64], s: i64) -> f64 {
    let n = a.len() as f64;
    let sorted = |x: &[f64]| {
        let mut v = x.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (va, a1, a2) = tie_sums(&sorted(a));
    let (vb, b1, b2) = tie_sums(&sorted(b));
    let var = (n * (n - 1.0) * (2.0 * n + 5.0) - va - vb) / 18.0
        + a1 * b1 / (2.0 * n * (n - 1.0))
        + a2 * b2 / (9.0 * n * (n - 1.0) * (n - 2.0));
    if var <= 0.0 {
        return 1.0;
    }
    let z = s as f64 / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * normal.sf(z.abs())).min(1.0)
}

/// Two-sided p-value: the share of reorderings of `b` whose |S| is at least
/// the observed one.
fn exact_p_value(a: &[f64], b: &[f64], s_obs: i64) -> f64 {
    let mut perm = b.to_vec();
    perm.sort_by(f64::total_cmp);
    let target = s_obs.abs();
    let (mut hits, mut total) = (0u64, 0u64);
    // Heap's algorithm visits every arrangement of positions, counting
    // arrangements of tied values separately, which keeps each equally likely.
    let n = perm.len();
    let mut c = vec![0usize; n];
    let mut visit = |p: &[f64]| {
        total += 1;
        if pair_counts(a, p).s.abs() >= target {
            hits += 1;
        }
    };
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "rankings differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument("kendall tau needs at least 2 items".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("rankings contain NaN".into()));
    }
    Ok(())
}

fn undefined() -> Error {
    Error::Undefined("kendall tau of a constant ranking".into())
}

/// Tau-b alone, in O(n log n), without the significance computation.
pub fn kendall_tau_b(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    pair_counts(a, b).tau_b().ok_or_else(undefined)
}

/// Tau-b between two equally long score vectors with its two-sided p-value.
/// Constant input leaves tau undefined.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<KendallTau> {
    check_pair(a, b)?;
    let counts = pair_counts(a, b);
    let tau = counts.tau_b().ok_or_else(undefined)?;
    let p_value = if a.len() <= EXACT_PERMUTATION_MAX {
        exact_p_value(a, b, counts.s)
    } else {
        normal_p_value(a, b, counts.s)
    };
    Ok(KendallTau { tau, p_value })
}
