//! Ordinary kriging of regression residuals.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use super::{great_circle_km, QcError, ResidualSite, Variogram};

/// Relative residual above which a solved system is considered unreliable.
const SOLVE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KrigeMethod {
    Ordinary,
    /// The kriging system was singular or ill-conditioned; the estimate is
    /// an inverse-distance-squared average instead.
    InverseDistance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrigeEstimate {
    pub value: f64,
    pub method: KrigeMethod,
}

/// Kriging over a fixed set of sites. When every site is in every
/// neighbourhood the system is factored once and reused for all targets.
pub struct Kriger<'a> {
    sites: &'a [ResidualSite],
    variogram: Variogram,
    neighbors: usize,
    global: Option<(DMatrix<f64>, LU<f64, Dyn, Dyn>)>,
}

impl<'a> Kriger<'a> {
    /// `neighbors` caps how many nearest sites enter each system.
    pub fn new(
        sites: &'a [ResidualSite],
        variogram: Variogram,
        neighbors: usize,
    ) -> Result<Self, QcError> {
        if sites.is_empty() {
            return Err(QcError::NoSites);
        }
        if variogram.is_degenerate() {
            return Err(QcError::DegenerateVariogram);
        }
        let neighbors = neighbors.max(1);
        let mut k = Kriger {
            sites,
            variogram,
            neighbors,
            global: None,
        };
        if sites.len() <= neighbors {
            let idx: Vec<usize> = (0..sites.len()).collect();
            let m = k.system(&idx);
            let lu = m.clone().lu();
            k.global = Some((m, lu));
        }
        Ok(k)
    }

    fn system(&self, idx: &[usize]) -> DMatrix<f64> {
        let n = idx.len();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate().skip(a + 1) {
                let (si, sj) = (&self.sites[i], &self.sites[j]);
                let g = self
                    .variogram
                    .gamma(great_circle_km(si.lat, si.lon, sj.lat, sj.lon));
                m[(a, b)] = g;
                m[(b, a)] = g;
            }
            m[(a, n)] = 1.0;
            m[(n, a)] = 1.0;
        }
        m
    }

    pub fn estimate(&self, lat: f64, lon: f64) -> KrigeEstimate {
        let distances: Vec<f64> = self
            .sites
            .iter()
            .map(|s| great_circle_km(lat, lon, s.lat, s.lon))
            .collect();
        let (idx, owned_matrix);
        let (lu, matrix) = match &self.global {
            Some((m, lu)) => {
                idx = (0..self.sites.len()).collect::<Vec<_>>();
                (Some(lu), m)
            }
            None => {
                let mut order: Vec<usize> = (0..self.sites.len()).collect();
                // Ties broken by site order so the neighbourhood is stable.
                order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));
                order.truncate(self.neighbors);
                idx = order;
                owned_matrix = self.system(&idx);
                (None, &owned_matrix)
            }
        };
        let n = idx.len();
        let mut rhs = DVector::zeros(n + 1);
        for (a, &i) in idx.iter().enumerate() {
            rhs[a] = self.variogram.gamma(distances[i]);
        }
        rhs[n] = 1.0;

        let solution = match lu {
            Some(lu) => lu.solve(&rhs),
            None => matrix.clone().lu().solve(&rhs),
        };
        if let Some(w) = solution.filter(|w| {
            let err = (matrix * w - &rhs).norm();
            w.iter().all(|v| v.is_finite()) && err <= SOLVE_TOLERANCE * rhs.norm().max(1.0)
        }) {
            let value = idx
                .iter()
                .enumerate()
                .map(|(a, &i)| w[a] * self.sites[i].residual)
                .sum();
            return KrigeEstimate {
                value,
                method: KrigeMethod::Ordinary,
            };
        }
        KrigeEstimate {
            value: inverse_distance(self.sites, &distances, &idx),
            method: KrigeMethod::InverseDistance,
        }
    }
}

fn inverse_distance(sites: &[ResidualSite], distances: &[f64], idx: &[usize]) -> f64 {
    let coincident: Vec<f64> = idx
        .iter()
        .filter(|&&i| distances[i] <= 0.0)
        .map(|&i| sites[i].residual)
        .collect();
    if !coincident.is_empty() {
        return coincident.iter().sum::<f64>() / coincident.len() as f64;
    }
    let (num, den) = idx.iter().fold((0.0, 0.0), |(num, den), &i| {
        let w = 1.0 / (distances[i] * distances[i]);
        (num + w * sites[i].residual, den + w)
    });
    num / den
}

/// One-shot kriging estimate at a single target using every site.
pub fn ordinary_krige(
    sites: &[ResidualSite],
    variogram: &Variogram,
    lat: f64,
    lon: f64,
) -> Result<KrigeEstimate, QcError> {
    Ok(Kriger::new(sites, *variogram, sites.len())?.estimate(lat, lon))
}
