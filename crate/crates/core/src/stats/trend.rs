//! Mann-Kendall trend test, Theil-Sen slope, the regional (multi-station)
//! extension, Benjamini-Yekutieli adjustment and field significance.

use serde::Serialize;

use super::{ranks, tie_groups, two_sided_normal_p, StatsError};

const MIN_YEARS: usize = 4;

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendResult {
    pub n: usize,
    pub s: f64,
    pub var_s: f64,
    pub z: f64,
    pub p: f64,
    /// Equals `p` until [`by_fdr_adjust`] has been applied to a group.
    pub p_adj: f64,
    /// Theil-Sen slope, value units per time unit.
    pub slope: f64,
    /// False for fewer than four points or a constant series (then `p = 1`).
    pub testable: bool,
}

/// Mann-Kendall with tie-corrected variance and continuity correction.
/// `t` holds the time coordinates (years), `x` the values.
pub fn mann_kendall(t: &[f64], x: &[f64]) -> TrendResult {
    debug_assert_eq!(t.len(), x.len());
    let n = x.len();
    let slope = sen_slope(t, x).unwrap_or(0.0);
    let constant = x.windows(2).all(|w| w[0] == w[1]);
    if n < MIN_YEARS || constant {
        return TrendResult {
            n,
            s: 0.0,
            var_s: 0.0,
            z: 0.0,
            p: 1.0,
            p_adj: 1.0,
            slope,
            testable: false,
        };
    }
    let s = kendall_s(t, x);
    let var_s = mk_variance(x);
    let z = corrected_z(s, var_s);
    let p = two_sided_normal_p(z);
    TrendResult {
        n,
        s,
        var_s,
        z,
        p,
        p_adj: p,
        slope,
        testable: true,
    }
}

/// `S = sum_{i<j} sgn(x_j - x_i)` with points taken in time order.
fn kendall_s(t: &[f64], x: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            s += sgn(t[j] - t[i]) * sgn(x[j] - x[i]);
        }
    }
    s
}

fn mk_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let ties: f64 = tie_groups(x)
        .into_iter()
        .map(|g| {
            let g = g as f64;
            g * (g - 1.0) * (2.0 * g + 5.0)
        })
        .sum();
    (n * (n - 1.0) * (2.0 * n + 5.0) - ties) / 18.0
}

fn corrected_z(s: f64, var: f64) -> f64 {
    if s == 0.0 || var <= 0.0 {
        0.0
    } else {
        (s - sgn(s)) / var.sqrt()
    }
}

/// Median of the pairwise slopes over pairs with distinct times.
pub fn sen_slope(t: &[f64], x: &[f64]) -> Option<f64> {
    let mut slopes = Vec::with_capacity(x.len() * x.len().saturating_sub(1) / 2);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            if t[j] != t[i] {
                slopes.push((x[j] - x[i]) / (t[j] - t[i]));
            }
        }
    }
    super::median(&slopes)
}

/// Rank-based estimate of `Cov(S_k, S_l)` over the years both series share.
///
/// `(K + 4 sum_i R_i^k R_i^l - n (n+1)^2) / 3`, where `K` counts
/// concordant-minus-discordant pairs between the two series and `R` are
/// within-series midranks. Returns `None` with fewer than four common years.
pub fn kendall_covariance(a: (&[f64], &[f64]), b: (&[f64], &[f64])) -> Option<f64> {
    let (ta, xa) = a;
    let (tb, xb) = b;
    let mut ya = Vec::new();
    let mut yb = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < ta.len() && j < tb.len() {
        if ta[i] == tb[j] {
            ya.push(xa[i]);
            yb.push(xb[j]);
            i += 1;
            j += 1;
        } else if ta[i] < tb[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    let n = ya.len();
    if n < MIN_YEARS {
        return None;
    }
    let mut k = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            k += sgn(ya[j] - ya[i]) * sgn(yb[j] - yb[i]);
        }
    }
    let ra = ranks(&ya);
    let rb = ranks(&yb);
    let cross: f64 = ra.iter().zip(&rb).map(|(p, q)| p * q).sum();
    let nf = n as f64;
    Some((k + 4.0 * cross - nf * (nf + 1.0).powi(2)) / 3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionalTrend {
    /// Stations with at least four years.
    pub stations: usize,
    pub s: f64,
    pub var: f64,
    pub z: f64,
    pub p: f64,
    /// Station pairs whose covariance was skipped for lack of common years.
    pub skipped_pairs: usize,
    /// The variance estimate fell below the floor and was raised to it.
    pub floored: bool,
}

/// Regional Mann-Kendall over a group of stations, each given as
/// `(years, values)` sorted by year.
///
/// The statistic sums station scores and the variance adds inter-station
/// covariances. The continuity correction is applied per station, so a
/// group of identical series has the same `z` as any one of them.
pub fn regional_mann_kendall(series: &[(&[f64], &[f64])]) -> Result<RegionalTrend, StatsError> {
    let usable: Vec<&(&[f64], &[f64])> =
        series.iter().filter(|(t, _)| t.len() >= MIN_YEARS).collect();
    if usable.is_empty() {
        return Err(StatsError::TooFew {
            need: MIN_YEARS,
            have: series.iter().map(|(t, _)| t.len()).max().unwrap_or(0),
        });
    }
    let mut s = 0.0;
    let mut corrected = 0.0;
    let mut var_sum = 0.0;
    for &&(t, x) in &usable {
        let sk = kendall_s(t, x);
        s += sk;
        corrected += sk - sgn(sk);
        var_sum += mk_variance(x);
    }
    let mut cov = 0.0;
    let mut skipped = 0;
    for (i, a) in usable.iter().enumerate() {
        for b in &usable[i + 1..] {
            match kendall_covariance(**a, **b) {
                Some(c) => cov += 2.0 * c,
                None => skipped += 1,
            }
        }
    }
    let floor = 0.01 * var_sum;
    let raw = var_sum + cov;
    let floored = raw < floor;
    let var = raw.max(floor);
    let z = if s == 0.0 || var <= 0.0 {
        0.0
    } else {
        corrected / var.sqrt()
    };
    Ok(RegionalTrend {
        stations: usable.len(),
        s,
        var,
        z,
        p: two_sided_normal_p(z),
        skipped_pairs: skipped,
        floored,
    })
}

/// Benjamini-Yekutieli step-up adjustment, returned in input order.
pub fn by_fdr_adjust(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    if m == 0 {
        return Vec::new();
    }
    let c: f64 = (1..=m).map(|k| 1.0 / k as f64).sum();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; m];
    let mut running = f64::INFINITY;
    for (rank0, &i) in order.iter().enumerate().rev() {
        let raw = p[i] * m as f64 * c / (rank0 + 1) as f64;
        running = running.min(raw);
        out[i] = running.min(1.0);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupTrendSummary {
    pub group: String,
    pub n: usize,
    pub n_sig: usize,
    pub proportion: f64,
    pub field_significant: bool,
}

/// Counts adjusted p-values below `alpha`; any one makes the group
/// field-significant.
pub fn field_significance(
    group: &str,
    p_adj: &[f64],
    alpha: f64,
) -> Result<GroupTrendSummary, StatsError> {
    if p_adj.is_empty() {
        return Err(StatsError::EmptyGroup(group.to_owned()));
    }
    let n_sig = p_adj.iter().filter(|&&p| p < alpha).count();
    Ok(GroupTrendSummary {
        group: group.to_owned(),
        n: p_adj.len(),
        n_sig,
        proportion: n_sig as f64 / p_adj.len() as f64,
        field_significant: n_sig >= 1,
    })
}
