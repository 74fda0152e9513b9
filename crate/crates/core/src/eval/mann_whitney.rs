use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_SAMPLES: usize = 12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MannWhitneyError {
    #[error("exact test supports 1..={MAX_SAMPLES} samples per group, got {a} and {b}")]
    SizeOutOfRange { a: usize, b: usize },
    #[error("samples must be finite")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of `a` (ties count one half).
    pub u: f64,
    /// Exact one-sided p-value for the alternative "a > b".
    pub p: f64,
}

/// Doubled midranks (integers, so ties compare exactly).
fn doubled_midranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0u64; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share the mean rank (start + 1 + end) / 2
        let doubled = (start + 1 + end) as u64;
        for &k in &order[start..end] {
            ranks[k] = doubled;
        }
        start = end;
    }
    ranks
}

/// Count subsets of size `k` from `ranks[from..]` whose sum plus `acc` is at least `target`.
fn count_at_least(ranks: &[u64], from: usize, k: usize, acc: u64, target: u64) -> u64 {
    if k == 0 {
        return u64::from(acc >= target);
    }
    if ranks.len() - from < k {
        return 0;
    }
    count_at_least(ranks, from + 1, k - 1, acc + ranks[from], target)
        + count_at_least(ranks, from + 1, k, acc, target)
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Exact one-sided Mann-Whitney test of "a tends to be larger than b".
///
/// The p-value enumerates every way of labelling the pooled values with
/// group sizes |a| and |b| and counts labellings with U at least as large.
pub fn mann_whitney_one_sided(a: &[f64], b: &[f64]) -> Result<MannWhitney, MannWhitneyError> {
    if a.is_empty() || b.is_empty() || a.len() > MAX_SAMPLES || b.len() > MAX_SAMPLES {
        return Err(MannWhitneyError::SizeOutOfRange { a: a.len(), b: b.len() });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(MannWhitneyError::NonFinite);
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = doubled_midranks(&pooled);
    let na = a.len() as u64;
    let observed: u64 = ranks[..a.len()].iter().sum();
    let u = observed as f64 / 2.0 - (na * (na + 1)) as f64 / 2.0;
    let hits = count_at_least(&ranks, 0, a.len(), 0, observed);
    let total = binomial(pooled.len() as u64, na);
    Ok(MannWhitney {
        u,
        p: hits as f64 / total as f64,
    })
}
