//! Two-sample comparisons: equal proportions, Wilcoxon rank-sum, and
//! Spearman rank correlation.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{ranks, tie_groups, two_sided_normal_p, StatsError};

/// Upper 97.5% point of the standard normal.
pub const Z_975: f64 = 1.959963984540054;

/// Largest combined sample size for which the exact rank-sum null
/// distribution is used automatically (tie-free input only).
const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProportionTest {
    pub p1: f64,
    pub p2: f64,
    /// `p1 - p2`
    pub diff: f64,
    /// Continuity-corrected chi-square statistic, 1 df.
    pub statistic: f64,
    pub p: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Pooled two-sample test of `k1/n1` against `k2/n2` with a continuity
/// correction no larger than half the observed difference, and a 95%
/// confidence interval for the difference from the hybrid score method
/// (Wilson limits per sample, combined in quadrature).
pub fn equal_proportions_test(
    k1: u64,
    n1: u64,
    k2: u64,
    n2: u64,
) -> Result<ProportionTest, StatsError> {
    for (k, n) in [(k1, n1), (k2, n2)] {
        if n == 0 || k > n {
            return Err(StatsError::InvalidCounts { k, n });
        }
    }
    let (nf1, nf2) = (n1 as f64, n2 as f64);
    let p1 = k1 as f64 / nf1;
    let p2 = k2 as f64 / nf2;
    let diff = p1 - p2;
    let pooled = (k1 + k2) as f64 / (nf1 + nf2);

    let (statistic, p) = if pooled <= 0.0 || pooled >= 1.0 {
        (0.0, 1.0)
    } else {
        let yates = 0.5_f64.min(diff.abs() / (1.0 / nf1 + 1.0 / nf2));
        let mut stat = 0.0;
        for (k, n) in [(k1 as f64, nf1), (k2 as f64, nf2)] {
            let e_yes = n * pooled;
            let e_no = n * (1.0 - pooled);
            stat += ((k - e_yes).abs() - yates).powi(2) / e_yes;
            stat += (((n - k) - e_no).abs() - yates).powi(2) / e_no;
        }
        // chi-square(1) upper tail = two-sided normal tail of sqrt(stat)
        (stat, two_sided_normal_p(stat.sqrt()))
    };

    let (l1, u1) = wilson_interval(k1, n1, Z_975);
    let (l2, u2) = wilson_interval(k2, n2, Z_975);
    let ci_low = diff - ((p1 - l1).powi(2) + (u2 - p2).powi(2)).sqrt();
    let ci_high = diff + ((u1 - p1).powi(2) + (p2 - l2).powi(2)).sqrt();
    Ok(ProportionTest {
        p1,
        p2,
        diff,
        statistic,
        p,
        ci_low,
        ci_high,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankSumMethod {
    /// Exact for small tie-free samples, normal approximation otherwise.
    #[default]
    Auto,
    /// Exact null distribution of the midrank sum, ties allowed.
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankSumResult {
    /// Rank sum of the first sample (midranks).
    pub w: f64,
    pub p: f64,
    pub exact: bool,
}

/// Two-sided Wilcoxon rank-sum test of `a` against `b`.
pub fn wilcoxon_ranksum(
    a: &[f64],
    b: &[f64],
    method: RankSumMethod,
) -> Result<RankSumResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::TooFew { need: 1, have: 0 });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let r = ranks(&pooled);
    let w: f64 = r[..a.len()].iter().sum();
    let ties = tie_groups(&pooled);
    let tied = ties.iter().any(|&t| t > 1);
    let exact = match method {
        RankSumMethod::Exact => true,
        RankSumMethod::Normal => false,
        RankSumMethod::Auto => pooled.len() <= EXACT_MAX_N && !tied,
    };
    let p = if exact {
        exact_p(&r, a.len(), w)
    } else {
        normal_p(a.len(), b.len(), w, &ties)
    };
    Ok(RankSumResult { w, p, exact })
}

/// Enumerates the null distribution of the first-sample rank sum over all
/// `C(N, n1)` assignments of the observed (mid)ranks.
fn exact_p(ranks: &[f64], n1: usize, w: f64) -> f64 {
    // Midranks are multiples of 1/2; work with doubled integer ranks.
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    let mut dp = vec![vec![0.0_f64; max_sum + 1]; n1 + 1];
    dp[0][0] = 1.0;
    for &r in &doubled {
        for j in (1..=n1).rev() {
            let (lo, hi) = dp.split_at_mut(j);
            let prev = &lo[j - 1];
            let cur = &mut hi[0];
            for s in (r..=max_sum).rev() {
                if prev[s - r] != 0.0 {
                    cur[s] += prev[s - r];
                }
            }
        }
    }
    let dist = &dp[n1];
    let total: f64 = dist.iter().sum();
    let obs = (2.0 * w).round() as usize;
    let lower: f64 = dist[..=obs].iter().sum();
    let upper: f64 = dist[obs..].iter().sum();
    (2.0 * lower.min(upper) / total).min(1.0)
}

fn normal_p(n1: usize, n2: usize, w: f64, ties: &[usize]) -> f64 {
    let (f1, f2) = (n1 as f64, n2 as f64);
    let n = f1 + f2;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let var = f1 * f2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)).max(1.0));
    if var <= 0.0 {
        return 1.0;
    }
    let d = w - f1 * (n + 1.0) / 2.0;
    // f64::signum(0.0) is 1, which would push a centred W off the mean
    let z = if d == 0.0 { 0.0 } else { (d - 0.5 * d.signum()) / var.sqrt() };
    two_sided_normal_p(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpearmanResult {
    pub n: usize,
    pub rho: f64,
    pub p: f64,
}

/// Spearman correlation as the Pearson correlation of midranks, with a
/// two-sided p-value from the t approximation on `n - 2` df.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<SpearmanResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFew { need: 3, have: n });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let rx = ranks(x);
    let ry = ranks(y);
    let mean = (n as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (dx, dy) = (a - mean, b - mean);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::Constant);
    }
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let p = if rho.abs() >= 1.0 {
        0.0
    } else {
        let df = (n - 2) as f64;
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
        (2.0 * dist.sf(t.abs())).min(1.0)
    };
    Ok(SpearmanResult { n, rho, p })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn proportions_identical() {
        let r = equal_proportions_test(10, 20, 10, 20).unwrap();
        assert_eq!((r.diff, r.p), (0.0, 1.0));
        let one = equal_proportions_test(1, 1, 1, 1).unwrap();
        assert_eq!(one.p, 1.0);
    }

    #[test]
    fn proportions_maximal_separation() {
        let r = equal_proportions_test(20, 20, 0, 20).unwrap();
        assert_eq!(r.diff, 1.0);
        assert!(r.p < 0.001);
    }

    #[test]
    fn proportions_reference_interval() {
        // 56/70 vs 48/80: published hybrid-score limits 0.0524 .. 0.3339.
        let r = equal_proportions_test(56, 70, 48, 80).unwrap();
        assert_relative_eq!(r.diff, 0.2, max_relative = 1e-12);
        assert!((r.ci_low - 0.0524).abs() < 5e-5, "{}", r.ci_low);
        assert!((r.ci_high - 0.3339).abs() < 5e-5, "{}", r.ci_high);
    }

    #[test]
    fn proportions_reject_bad_counts() {
        assert!(equal_proportions_test(1, 0, 0, 1).is_err());
        assert!(equal_proportions_test(3, 2, 0, 1).is_err());
    }

    #[test]
    fn ranksum_exact_examples() {
        let r = wilcoxon_ranksum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], RankSumMethod::Auto).unwrap();
        assert!(r.exact);
        assert_eq!(r.w, 6.0);
        assert_relative_eq!(r.p, 0.1, max_relative = 1e-12);
        let one = wilcoxon_ranksum(&[1.0], &[2.0], RankSumMethod::Auto).unwrap();
        assert_eq!(one.p, 1.0);
        let same =
            wilcoxon_ranksum(&[1.0, 2.0, 2.0], &[2.0, 1.0, 2.0], RankSumMethod::Exact).unwrap();
        assert_eq!(same.p, 1.0);
    }

    #[test]
    fn ranksum_constant_groups() {
        let r = wilcoxon_ranksum(&[3.0; 20], &[3.0; 20], RankSumMethod::Auto).unwrap();
        assert!(!r.exact);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn ranksum_centred_statistic_has_p_one() {
        // interleaved: W sits exactly on its null mean
        let a = [1.0, 4.0, 5.0, 8.0];
        let b = [2.0, 3.0, 6.0, 7.0];
        let r = wilcoxon_ranksum(&a, &b, RankSumMethod::Normal).unwrap();
        assert_eq!(r.w, 18.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn ranksum_separated_large_samples() {
        let a: Vec<f64> = (0..60).map(|i| 20.0 + (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = a.iter().map(|v| v - 2.0).collect();
        let r = wilcoxon_ranksum(&a, &b, RankSumMethod::Auto).unwrap();
        assert!(!r.exact && r.p < 1e-6);
    }

    #[test]
    fn spearman_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
        let r = spearman(&x, &sq).unwrap();
        assert_eq!((r.rho, r.p), (1.0, 0.0));
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(spearman(&x, &neg).unwrap().rho, -1.0);
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap();
        assert_relative_eq!(r.rho, 0.6, max_relative = 1e-12);
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &x[..3]), Err(StatsError::Constant));
        assert!(spearman(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn spearman_rank_invariant(
            pairs in prop::collection::vec((-100.0..100.0_f64, -100.0..100.0_f64), 3..40)
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            if let Ok(a) = spearman(&x, &y) {
                let b = spearman(&ranks(&x), &ranks(&y)).unwrap();
                prop_assert_eq!(a.rho.to_bits(), b.rho.to_bits());
                prop_assert!((-1.0..=1.0).contains(&a.rho));
            }
        }

        #[test]
        fn proportion_interval_contains_diff(k1 in 0u64..50, e1 in 0u64..50, k2 in 0u64..50, e2 in 0u64..50) {
            let (n1, n2) = (k1 + e1 + 1, k2 + e2 + 1);
            let r = equal_proportions_test(k1, n1, k2, n2).unwrap();
            prop_assert!(r.ci_low <= r.diff + 1e-12 && r.diff <= r.ci_high + 1e-12);
            prop_assert!((0.0..=1.0).contains(&r.p));
        }
    }
}
