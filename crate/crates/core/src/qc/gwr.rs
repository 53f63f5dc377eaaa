//! Geographically weighted regression of a value on station elevation.
//!
//! Each target gets its own weighted least-squares fit. Weights follow the
//! bisquare kernel `(1 - (d/h)^2)^2` for `d < h` and zero beyond, where the
//! adaptive bandwidth `h` is the great-circle distance from the target to
//! its k-th nearest training station. When `k` reaches the number of
//! training stations the bandwidth is unbounded and every weight is one,
//! which reduces the fit to global ordinary least squares.

use serde::{Deserialize, Serialize};

use super::{great_circle_km, QcError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GwrConfig {
    /// Adaptive bandwidth as a neighbour count.
    pub neighbors: usize,
    /// Fewer observed stations than this leaves a timestep unimputed.
    pub min_train: usize,
}

impl Default for GwrConfig {
    fn default() -> Self {
        GwrConfig {
            neighbors: 20,
            min_train: 3,
        }
    }
}

impl GwrConfig {
    pub fn validate(&self) -> Result<(), QcError> {
        if self.neighbors < 3 {
            return Err(QcError::InvalidConfig(format!(
                "gwr.neighbors must be at least 3, got {}",
                self.neighbors
            )));
        }
        if self.min_train < 3 {
            return Err(QcError::InvalidConfig(format!(
                "gwr.min_train must be at least 3, got {}",
                self.min_train
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSite {
    pub lat: f64,
    pub lon: f64,
    pub elevation: f64,
    pub value: f64,
}

/// Prediction location. Without an elevation the local fit collapses to
/// the kernel-weighted mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSite {
    pub lat: f64,
    pub lon: f64,
    pub elevation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GwrFit {
    pub predictions: Vec<f64>,
    /// Observed minus fitted value at each training site, fitted with the
    /// site itself included.
    pub residuals: Vec<f64>,
}

pub fn gwr_fit_predict(
    train: &[TrainSite],
    targets: &[TargetSite],
    cfg: &GwrConfig,
) -> Result<GwrFit, QcError> {
    cfg.validate()?;
    if train.len() < cfg.min_train {
        return Err(QcError::InsufficientTraining {
            have: train.len(),
            need: cfg.min_train,
        });
    }
    let mut scratch = LocalFit::new(train.len());
    let predictions = targets
        .iter()
        .map(|t| scratch.predict(train, t, cfg.neighbors))
        .collect();
    let residuals = train
        .iter()
        .map(|s| {
            let at = TargetSite {
                lat: s.lat,
                lon: s.lon,
                elevation: Some(s.elevation),
            };
            s.value - scratch.predict(train, &at, cfg.neighbors)
        })
        .collect();
    Ok(GwrFit {
        predictions,
        residuals,
    })
}

struct LocalFit {
    distances: Vec<f64>,
    sorted: Vec<f64>,
    weights: Vec<f64>,
}

impl LocalFit {
    fn new(n: usize) -> Self {
        LocalFit {
            distances: vec![0.0; n],
            sorted: vec![0.0; n],
            weights: vec![0.0; n],
        }
    }

    fn predict(&mut self, train: &[TrainSite], target: &TargetSite, neighbors: usize) -> f64 {
        let n = train.len();
        for (d, s) in self.distances.iter_mut().zip(train) {
            *d = great_circle_km(target.lat, target.lon, s.lat, s.lon);
        }
        if neighbors >= n {
            self.weights.fill(1.0);
        } else {
            self.sorted.copy_from_slice(&self.distances);
            let (_, h, _) = self.sorted.select_nth_unstable_by(neighbors - 1, f64::total_cmp);
            let h = *h;
            let mut total = 0.0;
            for (w, &d) in self.weights.iter_mut().zip(&self.distances) {
                *w = if d < h { (1.0 - (d / h).powi(2)).powi(2) } else { 0.0 };
                total += *w;
            }
            if total <= 0.0 {
                // Every neighbour sits at the bandwidth distance (typically
                // co-located stations); weight them equally.
                for (w, &d) in self.weights.iter_mut().zip(&self.distances) {
                    *w = if d <= h { 1.0 } else { 0.0 };
                }
            }
        }
        weighted_line(train, &self.weights, target.elevation)
    }
}

/// Weighted least-squares line of value on elevation, evaluated at `x0`.
/// Falls back to the weighted mean when the weighted elevations are all
/// equal (within 1e-9 relative) or when there is no target elevation.
fn weighted_line(train: &[TrainSite], weights: &[f64], x0: Option<f64>) -> f64 {
    let mut sw = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (s, &w) in train.iter().zip(weights) {
        if w > 0.0 {
            sw += w;
            sx += w * s.elevation;
            sy += w * s.value;
            lo = lo.min(s.elevation);
            hi = hi.max(s.elevation);
        }
    }
    let mean_x = sx / sw;
    let mean_y = sy / sw;
    let Some(x0) = x0 else {
        return mean_y;
    };
    if hi - lo <= 1e-9 * lo.abs().max(hi.abs()) {
        return mean_y;
    }
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (s, &w) in train.iter().zip(weights) {
        if w > 0.0 {
            let dx = s.elevation - mean_x;
            sxx += w * dx * dx;
            sxy += w * dx * (s.value - mean_y);
        }
    }
    mean_y + sxy / sxx * (x0 - mean_x)
}
