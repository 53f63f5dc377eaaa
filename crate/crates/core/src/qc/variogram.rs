//! Empirical semivariogram of regression residuals and an exponential model
//! fitted to it.

use super::{great_circle_km, QcError};

const BINS: usize = 10;
const MIN_PAIRS: usize = 5;
/// Residuals no larger than this are treated as zero.
const ZERO_RESIDUAL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualSite {
    pub lat: f64,
    pub lon: f64,
    pub residual: f64,
}

/// Exponential model `nugget + (sill - nugget) * (1 - exp(-3 d / range))`.
///
/// `gamma(0)` is exactly zero; `nugget` is the limit as `d -> 0+`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variogram {
    pub nugget: f64,
    pub sill: f64,
    pub range_km: f64,
}

impl Variogram {
    /// The "nothing to krige" model returned for all-zero residuals.
    pub fn degenerate() -> Self {
        Variogram {
            nugget: 0.0,
            sill: 0.0,
            range_km: 1.0,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.sill <= 0.0
    }

    pub fn gamma(&self, distance_km: f64) -> f64 {
        if distance_km <= 0.0 {
            0.0
        } else {
            self.nugget
                + (self.sill - self.nugget) * (1.0 - (-3.0 * distance_km / self.range_km).exp())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariogramBin {
    /// Mean separation of the pairs in the bin.
    pub distance_km: f64,
    pub semivariance: f64,
    pub pairs: usize,
}

/// Ten equal-width bins from zero to half the largest separation. Only
/// non-empty bins are returned. Co-located pairs are ignored.
pub fn empirical_variogram(sites: &[ResidualSite]) -> Vec<VariogramBin> {
    let mut pairs = Vec::with_capacity(sites.len() * sites.len().saturating_sub(1) / 2);
    for (i, a) in sites.iter().enumerate() {
        for b in &sites[i + 1..] {
            let d = great_circle_km(a.lat, a.lon, b.lat, b.lon);
            if d > 0.0 {
                pairs.push((d, 0.5 * (a.residual - b.residual).powi(2)));
            }
        }
    }
    let max = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    let cutoff = max / 2.0;
    let width = cutoff / BINS as f64;
    let mut sums = [(0.0_f64, 0.0_f64, 0_usize); BINS];
    for &(d, g) in &pairs {
        if d > cutoff || width <= 0.0 {
            continue;
        }
        let bin = ((d / width) as usize).min(BINS - 1);
        sums[bin].0 += d;
        sums[bin].1 += g;
        sums[bin].2 += 1;
    }
    sums.iter()
        .filter(|s| s.2 > 0)
        .map(|&(d, g, n)| VariogramBin {
            distance_km: d / n as f64,
            semivariance: g / n as f64,
            pairs: n,
        })
        .collect()
}

/// Fits the exponential model to the empirical bins by least squares with
/// pair-count weights.
///
/// For a fixed range the model is linear in nugget and partial sill, so the
/// search is one-dimensional over the range: a log-spaced scan followed by
/// golden-section refinement. Nugget and partial sill are kept non-negative.
pub fn fit_variogram(sites: &[ResidualSite]) -> Result<Variogram, QcError> {
    let mut distinct = 0;
    for (i, a) in sites.iter().enumerate() {
        for b in &sites[i + 1..] {
            if a.lat != b.lat || a.lon != b.lon {
                distinct += 1;
            }
        }
    }
    if distinct < MIN_PAIRS {
        return Err(QcError::InsufficientPairs(distinct));
    }
    if sites.iter().all(|s| s.residual.abs() <= ZERO_RESIDUAL) {
        return Ok(Variogram::degenerate());
    }

    let bins = empirical_variogram(sites);
    let max_bin = bins.iter().map(|b| b.distance_km).fold(0.0, f64::max);
    let min_bin = bins.iter().map(|b| b.distance_km).fold(f64::INFINITY, f64::min);
    if bins.len() < 2 || max_bin <= 0.0 {
        let total: usize = bins.iter().map(|b| b.pairs).sum();
        let mean = bins.iter().map(|b| b.semivariance * b.pairs as f64).sum::<f64>() / total as f64;
        return Ok(Variogram {
            nugget: mean,
            sill: mean,
            range_km: max_bin.max(1.0),
        });
    }

    let lo = (min_bin / 10.0).ln();
    let hi = (max_bin * 10.0).ln();
    const SCAN: usize = 64;
    let grid: Vec<f64> = (0..=SCAN)
        .map(|i| lo + (hi - lo) * i as f64 / SCAN as f64)
        .collect();
    let sse = |log_range: f64| fit_linear(&bins, log_range.exp()).1;
    let best = (0..=SCAN)
        .min_by(|&a, &b| sse(grid[a]).total_cmp(&sse(grid[b])))
        .unwrap();
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(SCAN)];
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (sse(c), sse(d));
    for _ in 0..60 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = sse(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = sse(d);
        }
    }
    let log_range = if sse(grid[best]) <= fc.min(fd) {
        grid[best]
    } else if fc <= fd {
        c
    } else {
        d
    };
    let range_km = log_range.exp();
    let ((nugget, partial), _) = fit_linear(&bins, range_km);
    Ok(Variogram {
        nugget,
        sill: nugget + partial,
        range_km,
    })
}

/// Weighted least squares for (nugget, partial sill) at a fixed range, with
/// both constrained to be non-negative. Returns the parameters and the SSE.
fn fit_linear(bins: &[VariogramBin], range_km: f64) -> ((f64, f64), f64) {
    let f: Vec<f64> = bins
        .iter()
        .map(|b| 1.0 - (-3.0 * b.distance_km / range_km).exp())
        .collect();
    let w: Vec<f64> = bins.iter().map(|b| b.pairs as f64).collect();
    let g: Vec<f64> = bins.iter().map(|b| b.semivariance).collect();
    let sw: f64 = w.iter().sum();
    let mean_f = w.iter().zip(&f).map(|(w, f)| w * f).sum::<f64>() / sw;
    let mean_g = w.iter().zip(&g).map(|(w, g)| w * g).sum::<f64>() / sw;
    let sff: f64 = w.iter().zip(&f).map(|(w, f)| w * (f - mean_f).powi(2)).sum();
    let sfg: f64 = (0..bins.len())
        .map(|i| w[i] * (f[i] - mean_f) * (g[i] - mean_g))
        .sum();

    let mut partial = if sff > 0.0 { sfg / sff } else { 0.0 };
    let mut nugget = mean_g - partial * mean_f;
    if partial < 0.0 {
        partial = 0.0;
        nugget = mean_g;
    } else if nugget < 0.0 {
        nugget = 0.0;
        let ff: f64 = w.iter().zip(&f).map(|(w, f)| w * f * f).sum();
        let fg: f64 = (0..bins.len()).map(|i| w[i] * f[i] * g[i]).sum();
        partial = if ff > 0.0 { (fg / ff).max(0.0) } else { 0.0 };
    }
    let nugget = nugget.max(0.0);
    let sse = (0..bins.len())
        .map(|i| w[i] * (g[i] - nugget - partial * f[i]).powi(2))
        .sum();
    ((nugget, partial), sse)
}
