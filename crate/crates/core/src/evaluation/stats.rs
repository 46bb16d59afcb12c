use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::{Error, Result};

/// Normal-approximation half-width `z·√(rate(1 − rate)/n)`.
pub fn confidence_interval(rate: f64, n: u64, z: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Domain(format!("rate {rate} outside [0, 1]")));
    }
    if n == 0 {
        return Err(Error::Domain("confidence interval needs n >= 1".into()));
    }
    Ok(z * (rate * (1.0 - rate) / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Sample (n − 1) standard deviation; 0 for a single value.
    pub std: f64,
    pub count: usize,
}

impl Aggregate {
    /// True when `std` is the single-run convention rather than an estimate.
    pub fn single(&self) -> bool {
        self.count == 1
    }
}

pub fn aggregate(values: &[f64]) -> Result<Aggregate> {
    if values.is_empty() {
        return Err(Error::Domain("aggregate of an empty sequence".into()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n == 1 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Ok(Aggregate { mean, std, count: n })
}

/// Middle value, or the mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("median of an empty sequence".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Ok(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

/// Per-metric mean and std over runs; every run lists the same metrics.
pub fn aggregate_runs(runs: &[Vec<f64>]) -> Result<Vec<Aggregate>> {
    let width = runs
        .first()
        .ok_or_else(|| Error::Domain("aggregate_runs needs at least one run".into()))?
        .len();
    if runs.iter().any(|r| r.len() != width) {
        return Err(Error::Dimension("runs report different metric counts".into()));
    }
    (0..width)
        .map(|j| aggregate(&runs.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect()
}

/// Ranks of the pooled values (1-based), ties sharing the average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Smaller-sample size up to which [`RankSumMethod::Auto`] enumerates.
pub const EXACT_MAX_SMALLER_SAMPLE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RankSumMethod {
    /// Exact when the smaller sample has at most 10 values, normal otherwise.
    Auto,
    Exact,
    /// Normal approximation with tie and continuity corrections.
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankSumTest {
    /// Rank sum of the first sample.
    pub statistic: f64,
    pub p_value: f64,
    pub method: RankSumMethod,
}

/// Permutation distribution of the rank sum of `n` values drawn from a
/// pooled set with the given (mid)ranks. Sums are held doubled so that
/// half-integer midranks stay integral.
#[derive(Debug, Clone)]
pub struct RankSumDistribution {
    n: usize,
    total: usize,
    /// `pmf[s]` = P(2·W = s).
    pmf: Vec<f64>,
}

impl RankSumDistribution {
    pub fn new(pooled_ranks: &[f64], n: usize) -> Result<Self> {
        let total = pooled_ranks.len();
        if n == 0 || n > total {
            return Err(Error::Domain(format!("sample size {n} invalid for {total} pooled values")));
        }
        let doubled: Vec<usize> = pooled_ranks.iter().map(|&r| (2.0 * r).round() as usize).collect();
        let mut sorted = doubled.clone();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        let max_sum: usize = sorted[..n].iter().sum();
        // ways[k][s]: subsets of size k with doubled sum s, as f64 counts
        let mut ways = vec![vec![0.0f64; max_sum + 1]; n + 1];
        ways[0][0] = 1.0;
        for (seen, &r) in doubled.iter().enumerate() {
            for k in (1..=n.min(seen + 1)).rev() {
                let (lower, upper) = ways.split_at_mut(k);
                let (src, dst) = (&lower[k - 1], &mut upper[0]);
                for s in (r..=max_sum).rev() {
                    let v = src[s - r];
                    if v != 0.0 {
                        dst[s] += v;
                    }
                }
            }
        }
        let mut pmf = ways.swap_remove(n);
        let norm: f64 = pmf.iter().sum();
        pmf.iter_mut().for_each(|p| *p /= norm);
        Ok(Self { n, total, pmf })
    }

    /// Doubled expected rank sum, `n(N + 1)`.
    fn doubled_mean(&self) -> i64 {
        (self.n * (self.total + 1)) as i64
    }

    pub fn prob_le(&self, w: f64) -> f64 {
        let s2 = (2.0 * w).round() as i64;
        self.pmf
            .iter()
            .enumerate()
            .filter(|&(s, _)| (s as i64) <= s2)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn prob_ge(&self, w: f64) -> f64 {
        let s2 = (2.0 * w).round() as i64;
        self.pmf
            .iter()
            .enumerate()
            .filter(|&(s, _)| (s as i64) >= s2)
            .map(|(_, p)| p)
            .sum()
    }

    /// `P(lo < W < hi)`.
    pub fn prob_between(&self, lo: f64, hi: f64) -> f64 {
        let (l2, h2) = ((2.0 * lo).round() as i64, (2.0 * hi).round() as i64);
        self.pmf
            .iter()
            .enumerate()
            .filter(|&(s, _)| (s as i64) > l2 && (s as i64) < h2)
            .map(|(_, p)| p)
            .sum()
    }

    /// `P(|W − E| ≥ |w − E|)`.
    pub fn two_sided_p(&self, w: f64) -> f64 {
        let mean2 = self.doubled_mean();
        let dev = ((2.0 * w).round() as i64 - mean2).abs();
        let p: f64 = self
            .pmf
            .iter()
            .enumerate()
            .filter(|&(s, _)| (s as i64 - mean2).abs() >= dev)
            .map(|(_, p)| p)
            .sum();
        p.min(1.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.pmf.iter().sum()
    }
}

/// Two-sided Wilcoxon rank-sum p-value ([`RankSumMethod::Auto`]).
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(rank_sum_test(a, b, RankSumMethod::Auto)?.p_value)
}

pub fn rank_sum_test(a: &[f64], b: &[f64], method: RankSumMethod) -> Result<RankSumTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("rank-sum test needs two non-empty samples".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Domain("rank-sum input contains NaN".into()));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let w: f64 = ranks[..a.len()].iter().sum();
    let method = match method {
        RankSumMethod::Auto if a.len().min(b.len()) <= EXACT_MAX_SMALLER_SAMPLE => RankSumMethod::Exact,
        RankSumMethod::Auto => RankSumMethod::Normal,
        m => m,
    };
    let p_value = match method {
        RankSumMethod::Exact => {
            // enumerate over the smaller sample; the two-sided p is symmetric
            let (n, w_small) = if a.len() <= b.len() {
                (a.len(), w)
            } else {
                (b.len(), ranks[a.len()..].iter().sum())
            };
            RankSumDistribution::new(&ranks, n)?.two_sided_p(w_small)
        }
        _ => normal_p(&ranks, a.len(), w),
    };
    Ok(RankSumTest {
        statistic: w,
        p_value,
        method,
    })
}

fn normal_p(ranks: &[f64], n: usize, w: f64) -> f64 {
    let total = ranks.len() as f64;
    let (n, m) = (n as f64, total - n as f64);
    let mean = n * (total + 1.0) / 2.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    for group in sorted.chunk_by(|x, y| x == y) {
        let t = group.len() as f64;
        ties += t * t * t - t;
    }
    let var = n * m / 12.0 * ((total + 1.0) - ties / (total * (total - 1.0)).max(1.0));
    if var <= 0.0 {
        return 1.0;
    }
    let z = (((w - mean).abs() - 0.5).max(0.0)) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * (1.0 - normal.cdf(z))).min(1.0)
}
