//! Monthly gap filling: at each timestep, a GWR on elevation trained on the
//! stations observed that month, plus ordinary kriging of its residuals.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    fit_variogram, gwr_fit_predict, GwrConfig, KrigeMethod, Kriger, QcError, ResidualSite,
    SlotStatus, StudyWindow, TargetSite, TrainSite,
};
use crate::{MonthlySeries, StationMeta, YearMonth};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImputeConfig {
    pub gwr: GwrConfig,
    /// Nearest training stations entering each kriging system.
    pub krige_neighbors: usize,
}

impl Default for ImputeConfig {
    fn default() -> Self {
        ImputeConfig {
            gwr: GwrConfig::default(),
            krige_neighbors: 64,
        }
    }
}

impl ImputeConfig {
    pub fn validate(&self) -> Result<(), QcError> {
        self.gwr.validate()?;
        if self.krige_neighbors == 0 {
            return Err(QcError::InvalidConfig(
                "krige_neighbors must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// What happened to the residual-kriging step at one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KrigingOutcome {
    /// Nothing was missing.
    NotNeeded,
    /// Too few observed stations to train on; missing slots stay missing.
    Untrained,
    /// Residuals were (numerically) zero; GWR predictions used alone.
    SkippedDegenerate,
    /// Too few distinct station pairs to fit a variogram.
    SkippedInsufficientPairs,
    /// `fallback` targets used inverse-distance weighting instead of kriging.
    Kriged { fallback: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestepNote {
    pub month: String,
    pub trained: usize,
    pub imputed: usize,
    pub unimputable: usize,
    pub kriging: KrigingOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputedMonthly {
    /// Sorted by station id; each series covers its original span and the
    /// whole study window.
    pub series: Vec<MonthlySeries>,
    pub masks: Vec<Vec<SlotStatus>>,
    /// One per window month, in order.
    pub notes: Vec<TimestepNote>,
}

/// Fills every missing in-window slot that can be filled. Observed values
/// are copied through untouched. Output does not depend on input order.
pub fn impute_monthly(
    series: &[MonthlySeries],
    stations: &[StationMeta],
    window: StudyWindow,
    cfg: &ImputeConfig,
) -> Result<ImputedMonthly, QcError> {
    if window.is_empty() {
        return Err(QcError::EmptyWindow(window));
    }
    cfg.validate()?;
    if let Some(first) = series.first() {
        if let Some(other) = series.iter().find(|s| s.element != first.element) {
            return Err(QcError::MixedElements(
                first.element.to_string(),
                other.element.to_string(),
            ));
        }
    }
    let meta: BTreeMap<&str, &StationMeta> =
        stations.iter().map(|m| (m.id.as_str(), m)).collect();
    let mut order: Vec<&MonthlySeries> = series.iter().collect();
    order.sort_by(|a, b| a.station.cmp(&b.station));
    let metas = order
        .iter()
        .map(|s| {
            meta.get(s.station.as_str())
                .copied()
                .ok_or_else(|| QcError::UnknownStation(s.station.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let first = window.first_month();
    let months: Vec<YearMonth> = (0..window.months() as i64).map(|i| first.offset(i)).collect();

    let per_step: Vec<(Vec<(usize, f64)>, TimestepNote)> = months
        .par_iter()
        .map(|&ym| impute_timestep(&order, &metas, ym, cfg))
        .collect();

    let window_end = first.offset(window.months() as i64 - 1);
    let mut out_series = Vec::with_capacity(order.len());
    let mut masks = Vec::with_capacity(order.len());
    for s in &order {
        let start = s.start.min(first);
        let end = s.end().max(window_end);
        let len = (end.index() - start.index() + 1) as usize;
        let shift = (s.start.index() - start.index()) as usize;
        let mut values = vec![None; len];
        values[shift..shift + s.values.len()].copy_from_slice(&s.values);
        let mask: Vec<SlotStatus> = values
            .iter()
            .map(|v| {
                if v.is_some() {
                    SlotStatus::Observed
                } else {
                    SlotStatus::Unimputable
                }
            })
            .collect();
        out_series.push(MonthlySeries {
            station: s.station.clone(),
            element: s.element,
            start,
            values,
        });
        masks.push(mask);
    }
    let mut notes = Vec::with_capacity(months.len());
    for (ym, (fills, note)) in months.iter().zip(per_step) {
        for (i, v) in fills {
            let slot = (ym.index() - out_series[i].start.index()) as usize;
            out_series[i].values[slot] = Some(v);
            masks[i][slot] = SlotStatus::Imputed;
        }
        notes.push(note);
    }
    Ok(ImputedMonthly {
        series: out_series,
        masks,
        notes,
    })
}

fn impute_timestep(
    order: &[&MonthlySeries],
    metas: &[&StationMeta],
    ym: YearMonth,
    cfg: &ImputeConfig,
) -> (Vec<(usize, f64)>, TimestepNote) {
    let mut train = Vec::new();
    let mut missing = Vec::new();
    for (i, (s, m)) in order.iter().zip(metas).enumerate() {
        match s.get(ym) {
            Some(value) => {
                if let Some(elevation) = m.elevation_m {
                    train.push(TrainSite {
                        lat: m.lat,
                        lon: m.lon,
                        elevation,
                        value,
                    });
                }
            }
            None => missing.push(i),
        }
    }
    let mut note = TimestepNote {
        month: ym.to_string(),
        trained: train.len(),
        imputed: 0,
        unimputable: 0,
        kriging: KrigingOutcome::NotNeeded,
    };
    if missing.is_empty() {
        return (Vec::new(), note);
    }
    let targets: Vec<TargetSite> = missing
        .iter()
        .map(|&i| TargetSite {
            lat: metas[i].lat,
            lon: metas[i].lon,
            elevation: metas[i].elevation_m,
        })
        .collect();
    let fit = match gwr_fit_predict(&train, &targets, &cfg.gwr) {
        Ok(fit) => fit,
        Err(_) => {
            note.unimputable = missing.len();
            note.kriging = KrigingOutcome::Untrained;
            return (Vec::new(), note);
        }
    };

    let residuals: Vec<ResidualSite> = train
        .iter()
        .zip(&fit.residuals)
        .map(|(t, &residual)| ResidualSite {
            lat: t.lat,
            lon: t.lon,
            residual,
        })
        .collect();
    let mut predictions = fit.predictions;
    note.kriging = match fit_variogram(&residuals) {
        Err(_) => KrigingOutcome::SkippedInsufficientPairs,
        Ok(v) if v.is_degenerate() => KrigingOutcome::SkippedDegenerate,
        Ok(v) => match Kriger::new(&residuals, v, cfg.krige_neighbors) {
            Err(_) => KrigingOutcome::SkippedDegenerate,
            Ok(kriger) => {
                let mut fallback = 0;
                for (p, t) in predictions.iter_mut().zip(&targets) {
                    let e = kriger.estimate(t.lat, t.lon);
                    if e.method == KrigeMethod::InverseDistance {
                        fallback += 1;
                    }
                    *p += e.value;
                }
                KrigingOutcome::Kriged { fallback }
            }
        },
    };
    note.imputed = missing.len();
    (missing.into_iter().zip(predictions).collect(), note)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::MonthlyElement;

    fn stations(n: usize) -> Vec<StationMeta> {
        (0..n)
            .map(|i| StationMeta {
                id: format!("USC{:08}", i),
                lat: 35.0 + (i % 5) as f64 * 0.9,
                lon: -100.0 + (i / 5) as f64 * 1.1,
                elevation_m: Some(100.0 + ((i * 37) % 11) as f64 * 120.0),
            })
            .collect()
    }

    fn window() -> StudyWindow {
        StudyWindow {
            start_year: 2000,
            end_year: 2001,
        }
    }

    fn field(
        metas: &[StationMeta],
        f: impl Fn(&StationMeta, usize) -> f64,
        missing: &[(usize, usize)],
    ) -> Vec<MonthlySeries> {
        metas
            .iter()
            .enumerate()
            .map(|(i, m)| MonthlySeries {
                station: m.id.clone(),
                element: MonthlyElement::Tavg,
                start: YearMonth::new(2000, 1),
                values: (0..24)
                    .map(|t| (!missing.contains(&(i, t))).then(|| f(m, t)))
                    .collect(),
            })
            .collect()
    }

    #[test]
    fn complete_input_passes_through() {
        let metas = stations(10);
        let input = field(&metas, |m, t| m.lat + t as f64, &[]);
        let out = impute_monthly(&input, &metas, window(), &ImputeConfig::default()).unwrap();
        assert_eq!(out.series, input);
        assert!(out.masks.iter().flatten().all(|&m| m == SlotStatus::Observed));
        assert!(out
            .notes
            .iter()
            .all(|n| n.kriging == KrigingOutcome::NotNeeded));
    }

    #[test]
    fn constant_field_fills_constant() {
        let metas = stations(15);
        let input = field(&metas, |_, _| 12.5, &[(3, 4), (7, 4), (9, 20)]);
        let out = impute_monthly(&input, &metas, window(), &ImputeConfig::default()).unwrap();
        for &(i, t) in &[(3, 4), (7, 4), (9, 20)] {
            assert_eq!(out.masks[i][t], SlotStatus::Imputed);
            assert_abs_diff_eq!(out.series[i].values[t].unwrap(), 12.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn affine_field_is_recovered_without_kriging() {
        let metas = stations(20);
        let f = |m: &StationMeta, t: usize| 25.0 - 0.0065 * m.elevation_m.unwrap() + 0.1 * t as f64;
        let input = field(&metas, f, &[(0, 0), (5, 0), (11, 13), (19, 23)]);
        let out = impute_monthly(&input, &metas, window(), &ImputeConfig::default()).unwrap();
        for &(i, t) in &[(0, 0), (5, 0), (11, 13), (19, 23)] {
            assert!((out.series[i].values[t].unwrap() - f(&metas[i], t)).abs() <= 1e-9);
        }
        assert_eq!(out.notes[0].kriging, KrigingOutcome::SkippedDegenerate);
    }

    #[test]
    fn too_few_observed_stays_missing() {
        let metas = stations(3);
        let input = field(&metas, |_, _| 1.0, &[(0, 2)]);
        let out = impute_monthly(&input, &metas, window(), &ImputeConfig::default()).unwrap();
        assert_eq!(out.masks[0][2], SlotStatus::Unimputable);
        assert_eq!(out.series[0].values[2], None);
        assert_eq!(out.notes[2].kriging, KrigingOutcome::Untrained);
    }

    #[test]
    fn output_extends_to_window() {
        let metas = stations(6);
        let mut input = field(&metas, |_, _| 1.0, &[]);
        input[0].start = YearMonth::new(2000, 7);
        input[0].values.truncate(6);
        let out = impute_monthly(&input, &metas, window(), &ImputeConfig::default()).unwrap();
        assert_eq!(out.series[0].start, YearMonth::new(2000, 1));
        assert_eq!(out.series[0].values.len(), 24);
        assert_eq!(out.masks[0][0], SlotStatus::Imputed);
        assert_eq!(out.masks[0][23], SlotStatus::Imputed);
    }

    #[test]
    fn station_order_does_not_matter() {
        let metas = stations(25);
        let input = field(
            &metas,
            |m, t| (m.lat * 3.1).sin() + 0.003 * m.elevation_m.unwrap() + (t as f64 * 0.5).cos(),
            &[(2, 1), (8, 1), (13, 7), (21, 22), (4, 22)],
        );
        let cfg = ImputeConfig::default();
        let a = impute_monthly(&input, &metas, window(), &cfg).unwrap();
        let mut rev = input.clone();
        rev.reverse();
        let mut metas_rev = metas.clone();
        metas_rev.rotate_left(7);
        let b = impute_monthly(&rev, &metas_rev, window(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_station_is_an_error() {
        let metas = stations(4);
        let input = field(&metas, |_, _| 1.0, &[]);
        assert!(matches!(
            impute_monthly(&input, &metas[1..], window(), &ImputeConfig::default()),
            Err(QcError::UnknownStation(_))
        ));
    }
}
