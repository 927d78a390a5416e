//! Rank-based tests for paired condition comparisons.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use thiserror::Error;

/// Largest sample size for which the signed-rank p-value is enumerated.
pub const EXACT_WILCOXON_MAX_N: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("every pair has zero difference")]
    AllZeroDifferences,
}

/// Paired observations, one row per subject and one column per condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionMatrix {
    values: Vec<Vec<f64>>,
}

impl ConditionMatrix {
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self, StatsError> {
        let n = values.len();
        if n < 2 {
            return Err(StatsError::DegenerateInput(format!("need at least 2 subjects, got {n}")));
        }
        let k = values[0].len();
        if k < 2 {
            return Err(StatsError::DegenerateInput(format!("need at least 2 conditions, got {k}")));
        }
        if let Some(i) = values.iter().position(|r| r.len() != k) {
            return Err(StatsError::DegenerateInput(format!("row {i} has {} values, expected {k}", values[i].len())));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(StatsError::DegenerateInput("non-finite value".into()));
        }
        Ok(Self { values })
    }

    pub fn subjects(&self) -> usize {
        self.values.len()
    }

    pub fn conditions(&self) -> usize {
        self.values[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// χ² for Friedman, Z for Wilcoxon.
    pub statistic: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub df: Option<f64>,
    /// Observations that entered the ranking.
    pub n: usize,
    /// Pairs dropped for zero difference.
    pub zeros_dropped: usize,
    /// Whether `p` came from exact enumeration.
    pub exact: bool,
}

/// Average ranks (1-based) and the tie group sizes.
pub fn average_ranks(xs: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && xs[idx[j]] == xs[idx[i]] {
            j += 1;
        }
        // Positions i..j hold ranks i+1..=j.
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

/// Friedman omnibus test with tie correction.
pub fn friedman(m: &ConditionMatrix) -> Result<TestResult, StatsError> {
    let n = m.subjects() as f64;
    let k = m.conditions() as f64;
    let mut rank_sums = vec![0.0; m.conditions()];
    let mut tie_term = 0.0;
    for row in m.rows() {
        let (ranks, ties) = average_ranks(row);
        for (s, r) in rank_sums.iter_mut().zip(ranks) {
            *s += r;
        }
        tie_term += ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>();
    }
    let sum_sq: f64 = rank_sums.iter().map(|r| r * r).sum();
    let uncorrected = 12.0 * sum_sq / (n * k * (k + 1.0)) - 3.0 * n * (k + 1.0);
    let correction = 1.0 - tie_term / (n * k * (k * k - 1.0));
    let df = k - 1.0;
    if correction <= 0.0 {
        // Every subject tied across all conditions.
        return Ok(TestResult {
            statistic: 0.0,
            p: 1.0,
            df: Some(df),
            n: m.subjects(),
            zeros_dropped: 0,
            exact: false,
        });
    }
    let chi2 = (uncorrected / correction).max(0.0);
    Ok(TestResult {
        statistic: chi2,
        p: chi2_sf(chi2, df),
        df: Some(df),
        n: m.subjects(),
        zeros_dropped: 0,
        exact: false,
    })
}

/// Upper tail of the χ² distribution.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let dist = ChiSquared::new(df).expect("df > 0");
    dist.sf(x).clamp(0.0, 1.0)
}

fn normal_two_sided(z: f64) -> f64 {
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * std.sf(z.abs())).clamp(0.0, 1.0)
}

/// Signed ranks of the non-zero differences `a - b`, in input order.
pub fn signed_ranks(pairs: &[(f64, f64)]) -> Vec<f64> {
    let d: Vec<f64> = pairs.iter().map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let (ranks, _) = average_ranks(&abs);
    d.iter().zip(ranks).map(|(x, r)| r.copysign(*x)).collect()
}

/// Two-sided Wilcoxon signed-rank test on differences `a - b`.
///
/// The reported Z is positive when the `a` values tend to be larger.
pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)]) -> Result<TestResult, StatsError> {
    if pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(StatsError::DegenerateInput("non-finite value".into()));
    }
    let d: Vec<f64> = pairs.iter().map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let zeros_dropped = pairs.len() - d.len();
    if d.is_empty() {
        return Err(StatsError::AllZeroDifferences);
    }
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let (ranks, ties) = average_ranks(&abs);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_adj: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_adj;
    let dev = w_plus - mean;
    let z = if var > 0.0 {
        (dev.abs() - 0.5).max(0.0).copysign(dev) / var.sqrt()
    } else {
        0.0
    };
    let z = if z == 0.0 { 0.0 } else { z };

    let (p, exact) = if n <= EXACT_WILCOXON_MAX_N {
        (exact_signed_rank_p(&ranks, w_plus), true)
    } else {
        (normal_two_sided(z), false)
    };
    Ok(TestResult {
        statistic: z,
        p,
        df: None,
        n,
        zeros_dropped,
        exact,
    })
}

/// Two-sided p by enumerating all sign assignments of the given ranks.
fn exact_signed_rank_p(ranks: &[f64], w_obs: f64) -> f64 {
    let n = ranks.len();
    let total: f64 = ranks.iter().sum();
    let mean = total / 2.0;
    let obs = (w_obs - mean).abs();
    let mut extreme = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if (w - mean).abs() >= obs - 1e-9 {
            extreme += 1;
        }
    }
    (extreme as f64 / (1u64 << n) as f64).min(1.0)
}

/// Holm step-down adjustment, returned in input order.
pub fn holm_correct(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut out = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (j, &i) in idx.iter().enumerate() {
        let adj = ((m - j) as f64 * p_values[i]).min(1.0);
        running = running.max(adj);
        out[i] = running;
    }
    out
}
