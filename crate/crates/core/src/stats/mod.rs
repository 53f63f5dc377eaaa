//! Inferential tests: trend detection with false-discovery control and the
//! two-sample comparisons used between UC and non-UC groups.

mod compare;
mod trend;

use thiserror::Error;

pub use compare::{
    equal_proportions_test, spearman, wilcoxon_ranksum, wilson_interval, ProportionTest,
    RankSumMethod, RankSumResult, SpearmanResult, Z_975,
};
pub use trend::{
    by_fdr_adjust, field_significance, kendall_covariance, mann_kendall, regional_mann_kendall,
    sen_slope, GroupTrendSummary, RegionalTrend, TrendResult,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("group `{0}` has no members")]
    EmptyGroup(String),
    #[error("inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} values, got {have}")]
    TooFew { need: usize, have: usize },
    #[error("input is constant; statistic undefined")]
    Constant,
    #[error("invalid counts {k}/{n}")]
    InvalidCounts { k: u64, n: u64 },
    #[error("non-finite input")]
    NonFinite,
}

/// Midranks (1-based) of `x`; tied values share the mean of their ranks.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share their mean
        let mid = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            r[k] = mid;
        }
        i = j;
    }
    r
}

/// Sizes of the groups of tied values (groups of one included).
pub(crate) fn tie_groups(x: &[f64]) -> Vec<usize> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let mut j = i + 1;
        while j < s.len() && s[j] == s[i] {
            j += 1;
        }
        out.push(j - i);
        i = j;
    }
    out
}

pub fn median(x: &[f64]) -> Option<f64> {
    if x.is_empty() {
        return None;
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    })
}

/// Two-sided standard-normal tail probability `P(|Z| >= |z|)`.
pub fn two_sided_normal_p(z: f64) -> f64 {
    statrs::function::erf::erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}
