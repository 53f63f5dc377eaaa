//! Synthetic worlds: station networks laid out in rectangular climate
//! regions, each holding one urban corridor, with daily and monthly
//! temperatures drawn from a seasonal climatology plus planted trends,
//! offsets, noise and gaps.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::Inputs;
use super::store;
use super::ConfigError;
use crate::geo::{write_ghcnd, write_ghcnm, write_station_metadata, Polygon, Region};
use crate::{
    DailyElement, DailySeries, Error, ExplanatoryVars, MonthlyElement, MonthlySeries, RegionSet,
    Result, StationMeta, YearMonth,
};

/// Two-state gap process: a gap starts with `*_start_prob` per slot and
/// lasts a geometric number of slots with mean `*_mean_len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapSpec {
    pub daily_start_prob: f64,
    pub daily_mean_len: f64,
    pub monthly_start_prob: f64,
    pub monthly_mean_len: f64,
}

impl Default for GapSpec {
    fn default() -> Self {
        GapSpec {
            daily_start_prob: 0.002,
            daily_mean_len: 3.0,
            monthly_start_prob: 0.003,
            monthly_mean_len: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    /// Number of climate regions, each hosting one UC.
    pub pairs: usize,
    /// Stations per UC.
    pub uc_stations: usize,
    /// Stations per climate region outside its UC.
    pub nonuc_stations: usize,
    /// Data run from January of `start_year - 1` (so the first DJF is
    /// complete) to December of `end_year`.
    pub start_year: i32,
    pub end_year: i32,
    /// °C per year, relative to `start_year`.
    pub uc_trend_c_per_year: f64,
    pub nonuc_trend_c_per_year: f64,
    pub uc_offset_c: f64,
    /// Per station-year anomaly shared by every day of the year.
    pub annual_noise_sd: f64,
    pub daily_noise_sd: f64,
    pub seasonal_amplitude_c: f64,
    pub max_elevation_m: f64,
    pub gaps: GapSpec,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            pairs: 2,
            uc_stations: 30,
            nonuc_stations: 30,
            start_year: 1956,
            end_year: 2015,
            uc_trend_c_per_year: 0.0,
            nonuc_trend_c_per_year: 0.0,
            uc_offset_c: 0.0,
            annual_noise_sd: 0.3,
            daily_noise_sd: 1.0,
            seasonal_amplitude_c: 10.0,
            max_elevation_m: 800.0,
            gaps: GapSpec::default(),
        }
    }
}

const MAX_PAIRS: usize = 20;

impl SynthSpec {
    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(format!("synth: {m}")));
        if self.pairs == 0 || self.pairs > MAX_PAIRS {
            return invalid(&format!("pairs must lie in 1..={MAX_PAIRS}"));
        }
        if self.start_year > self.end_year || self.start_year < 1801 || self.end_year > 9998 {
            return invalid("years must satisfy 1801 <= start_year <= end_year <= 9998");
        }
        let finite = [
            self.uc_trend_c_per_year,
            self.nonuc_trend_c_per_year,
            self.uc_offset_c,
            self.seasonal_amplitude_c,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return invalid("trends, offset and amplitude must be finite");
        }
        for (name, v) in [
            ("annual_noise_sd", self.annual_noise_sd),
            ("daily_noise_sd", self.daily_noise_sd),
            ("max_elevation_m", self.max_elevation_m),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return invalid(&format!("{name} must be finite and non-negative"));
            }
        }
        let g = &self.gaps;
        for p in [g.daily_start_prob, g.monthly_start_prob] {
            if !(0.0..1.0).contains(&p) {
                return invalid("gap start probabilities must lie in [0, 1)");
            }
        }
        for m in [g.daily_mean_len, g.monthly_mean_len] {
            if !(m.is_finite() && m >= 1.0) {
                return invalid("gap mean lengths must be at least 1");
            }
        }
        Ok(())
    }
}

/// Where a synthetic station sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    Uc,
    NonUc,
}

#[derive(Debug, Clone)]
pub struct SynthStation {
    pub meta: StationMeta,
    pub pair: usize,
    pub placement: Placement,
}

/// A generated world. Series are sorted by station id, TMAX before TMIN and
/// TMIN, TAVG, TMAX for monthly data.
#[derive(Debug, Clone)]
pub struct SynthWorld {
    pub stations: Vec<SynthStation>,
    pub daily: Vec<DailySeries>,
    pub monthly: Vec<MonthlySeries>,
    pub regions: RegionSet,
    pub covariates: Vec<ExplanatoryVars>,
}

pub fn cr_name(pair: usize) -> String {
    format!("CR{:02}", pair + 1)
}

pub fn uc_name(pair: usize) -> String {
    format!("UC{:02}", pair + 1)
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
    Polygon {
        rings: vec![vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]],
    }
}

/// Climate region `k` spans 10° of longitude starting at -125 + 12k and
/// latitudes 30-40; its UC is the central 4° × 4° box.
fn cr_box(k: usize) -> [f64; 4] {
    let x0 = -125.0 + 12.0 * k as f64;
    [x0, 30.0, x0 + 10.0, 40.0]
}

fn uc_box(k: usize) -> [f64; 4] {
    let x0 = -122.0 + 12.0 * k as f64;
    [x0, 33.0, x0 + 4.0, 37.0]
}

fn inside(b: [f64; 4], lon: f64, lat: f64) -> bool {
    lon >= b[0] && lon <= b[2] && lat >= b[1] && lat <= b[3]
}

// Coordinates are kept to the 4 decimals the inventory format stores, and
// kept off region edges so assignment is unambiguous.
fn sample_in(rng: &mut ChaCha8Rng, b: [f64; 4], margin: f64) -> (f64, f64) {
    let round4 = |v: f64| (v * 1e4).round() / 1e4;
    let lon = round4(rng.random_range(b[0] + margin..b[2] - margin));
    let lat = round4(rng.random_range(b[1] + margin..b[3] - margin));
    (lon, lat)
}

fn layout(seed: u64, spec: &SynthSpec) -> (Vec<SynthStation>, RegionSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stations = Vec::new();
    let mut regions = RegionSet::default();
    for k in 0..spec.pairs {
        let cr = cr_box(k);
        let uc = uc_box(k);
        regions.climate_regions.push(Region {
            name: cr_name(k),
            parts: vec![rect(cr[0], cr[1], cr[2], cr[3])],
        });
        regions.ucs.push(Region {
            name: uc_name(k),
            parts: vec![rect(uc[0], uc[1], uc[2], uc[3])],
        });
        let mut push = |rng: &mut ChaCha8Rng, lon: f64, lat: f64, placement| {
            let elev = (rng.random_range(0.0..=spec.max_elevation_m) * 10.0).round() / 10.0;
            stations.push(SynthStation {
                meta: StationMeta {
                    id: String::new(),
                    lat,
                    lon,
                    elevation_m: Some(elev),
                },
                pair: k,
                placement,
            });
        };
        for _ in 0..spec.uc_stations {
            let (lon, lat) = sample_in(&mut rng, uc, 0.01);
            push(&mut rng, lon, lat, Placement::Uc);
        }
        for _ in 0..spec.nonuc_stations {
            let (lon, lat) = loop {
                let (lon, lat) = sample_in(&mut rng, cr, 0.01);
                let halo = [uc[0] - 0.01, uc[1] - 0.01, uc[2] + 0.01, uc[3] + 0.01];
                if !inside(halo, lon, lat) {
                    break (lon, lat);
                }
            };
            push(&mut rng, lon, lat, Placement::NonUc);
        }
    }
    for (i, s) in stations.iter_mut().enumerate() {
        s.meta.id = format!("USC{:08}", i + 1);
    }
    (stations, regions)
}

/// Marks gap slots with a two-state process.
fn gap_mask(rng: &mut ChaCha8Rng, n: usize, start_prob: f64, mean_len: f64) -> Vec<bool> {
    let mut out = vec![false; n];
    if start_prob <= 0.0 {
        return out;
    }
    let stop = 1.0 / mean_len;
    let mut in_gap = false;
    for slot in out.iter_mut() {
        in_gap = if in_gap {
            rng.random::<f64>() >= stop
        } else {
            rng.random::<f64>() < start_prob
        };
        *slot = in_gap;
    }
    out
}

fn day_of_year_365(d: NaiveDate) -> f64 {
    let ord0 = d.ordinal0();
    // 29 February repeats 28 February.
    let ord0 = if crate::geo::is_leap_year(d.year()) && ord0 >= 59 {
        ord0 - 1
    } else {
        ord0
    };
    ord0 as f64
}

/// Daily mean temperature climatology at a site, °C.
pub fn climatology(spec: &SynthSpec, meta: &StationMeta, d: NaiveDate) -> f64 {
    let base = 22.0 - 0.6 * (meta.lat - 30.0) - 0.0065 * meta.elevation_m.unwrap_or(0.0);
    let phase = 2.0 * PI * (day_of_year_365(d) - 15.0) / 365.0;
    base - spec.seasonal_amplitude_c * phase.cos()
}

fn round_to(v: f64, scale: f64) -> f64 {
    (v * scale).round() / scale
}

fn station_series(
    seed: u64,
    index: usize,
    spec: &SynthSpec,
    st: &SynthStation,
) -> ([DailySeries; 2], [MonthlySeries; 3]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    let first_year = spec.start_year - 1;
    let start = NaiveDate::from_ymd_opt(first_year, 1, 1).unwrap();
    let end = NaiveDate::from_ymd_opt(spec.end_year, 12, 31).unwrap();
    let n_days = (end - start).num_days() as usize + 1;
    let n_years = (spec.end_year - first_year + 1) as usize;

    let (trend, offset) = match st.placement {
        Placement::Uc => (spec.uc_trend_c_per_year, spec.uc_offset_c),
        Placement::NonUc => (spec.nonuc_trend_c_per_year, 0.0),
    };
    let annual = Normal::new(0.0, spec.annual_noise_sd).unwrap();
    let daily = Normal::new(0.0, spec.daily_noise_sd).unwrap();
    let year_shift: Vec<f64> = (0..n_years)
        .map(|i| {
            let year = first_year + i as i32;
            trend * (year - spec.start_year) as f64 + offset + annual.sample(&mut rng)
        })
        .collect();

    let mut hi = Vec::with_capacity(n_days);
    let mut lo = Vec::with_capacity(n_days);
    for d in start.iter_days().take(n_days) {
        let c = climatology(spec, &st.meta, d) + year_shift[(d.year() - first_year) as usize];
        hi.push(round_to(c + 5.0 + daily.sample(&mut rng), 10.0));
        lo.push(round_to(c - 5.0 + daily.sample(&mut rng), 10.0));
    }

    // Monthly means come from the complete daily record.
    let n_months = n_years * 12;
    let mut m_hi = Vec::with_capacity(n_months);
    let mut m_lo = Vec::with_capacity(n_months);
    let mut m_avg = Vec::with_capacity(n_months);
    let mut at = 0;
    for m in 0..n_months {
        let ym = YearMonth::new(first_year, 1).offset(m as i64);
        let len = ym.days() as usize;
        let mean = |v: &[f64]| v[at..at + len].iter().sum::<f64>() / len as f64;
        let (h, l) = (mean(&hi), mean(&lo));
        m_hi.push(round_to(h, 100.0));
        m_lo.push(round_to(l, 100.0));
        m_avg.push(round_to((h + l) / 2.0, 100.0));
        at += len;
    }

    let g = &spec.gaps;
    let gaps_hi = gap_mask(&mut rng, n_days, g.daily_start_prob, g.daily_mean_len);
    let gaps_lo = gap_mask(&mut rng, n_days, g.daily_start_prob, g.daily_mean_len);
    let gaps_m = gap_mask(&mut rng, n_months, g.monthly_start_prob, g.monthly_mean_len);
    let apply = |v: Vec<f64>, gaps: &[bool]| -> Vec<Option<f64>> {
        v.into_iter().zip(gaps).map(|(x, &g)| (!g).then_some(x)).collect()
    };

    let id = &st.meta.id;
    let d = |element, values| DailySeries {
        station: id.clone(),
        element,
        start,
        values,
    };
    let m = |element, values| MonthlySeries {
        station: id.clone(),
        element,
        start: YearMonth::new(first_year, 1),
        values,
    };
    (
        [
            d(DailyElement::Tmax, apply(hi, &gaps_hi)),
            d(DailyElement::Tmin, apply(lo, &gaps_lo)),
        ],
        [
            m(MonthlyElement::Tmin, apply(m_lo, &gaps_m)),
            m(MonthlyElement::Tavg, apply(m_avg, &gaps_m)),
            m(MonthlyElement::Tmax, apply(m_hi, &gaps_m)),
        ],
    )
}

fn covariates(seed: u64, spec: &SynthSpec, stations: &[SynthStation]) -> Vec<ExplanatoryVars> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    (0..spec.pairs)
        .map(|k| {
            let elevs: Vec<f64> = stations
                .iter()
                .filter(|s| s.pair == k)
                .filter_map(|s| s.meta.elevation_m)
                .collect();
            let (mean, range) = if elevs.is_empty() {
                (None, None)
            } else {
                let lo = elevs.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = elevs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mean = elevs.iter().sum::<f64>() / elevs.len() as f64;
                (Some(round_to(mean, 100.0)), Some(round_to(hi - lo, 100.0)))
            };
            let pop_uc = rng.random_range(1.0e6..4.0e7_f64).round();
            ExplanatoryVars {
                uc_id: uc_name(k),
                cr_id: cr_name(k),
                pop_uc: Some(pop_uc),
                pop_diff: Some((pop_uc * rng.random_range(0.2..0.9)).round()),
                pop_pct_change_uc: Some(round_to(rng.random_range(0.0..3.0), 1000.0)),
                pop_diff_pct_change: Some(round_to(rng.random_range(-1.0..2.0), 1000.0)),
                pct_urban: Some(round_to(rng.random_range(1.0..40.0), 100.0)),
                pct_cropland: Some(round_to(rng.random_range(0.0..50.0), 100.0)),
                mean_elev: mean,
                elev_range: range,
            }
        })
        .collect()
}

/// Generates a world. The same seed and spec always give the same world,
/// whatever the thread count.
pub fn synth_generate(seed: u64, spec: &SynthSpec) -> SynthWorld {
    let (stations, regions) = layout(seed, spec);
    let per_station: Vec<_> = stations
        .par_iter()
        .enumerate()
        .map(|(i, st)| station_series(seed, i, spec, st))
        .collect();
    let mut daily = Vec::with_capacity(stations.len() * 2);
    let mut monthly = Vec::with_capacity(stations.len() * 3);
    for (d, m) in per_station {
        daily.extend(d);
        monthly.extend(m);
    }
    let covariates = covariates(seed, spec, &stations);
    SynthWorld {
        stations,
        daily,
        monthly,
        regions,
        covariates,
    }
}

pub const SYNTH_FILES: [&str; 5] = [
    "ghcnd.dly",
    "ghcnm.dat",
    "stations.txt",
    "regions.geojson",
    "covariates.csv",
];

impl SynthWorld {
    pub fn station_meta(&self) -> Vec<StationMeta> {
        self.stations.iter().map(|s| s.meta.clone()).collect()
    }

    /// Writes the world in the input formats and returns the matching
    /// [`Inputs`].
    pub fn write(&self, dir: &Path) -> Result<Inputs> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = |name: &str| -> PathBuf { dir.join(name) };
        let io = |p: &Path| {
            let p = p.to_owned();
            move |e| Error::io(p, e)
        };

        let p = path(SYNTH_FILES[0]);
        let mut w = store::create(&p)?;
        for s in &self.daily {
            write_ghcnd(s, &mut w).map_err(io(&p))?;
        }
        w.flush().map_err(io(&p))?;

        let p = path(SYNTH_FILES[1]);
        let mut w = store::create(&p)?;
        for s in &self.monthly {
            write_ghcnm(s, &mut w).map_err(io(&p))?;
        }
        w.flush().map_err(io(&p))?;

        let p = path(SYNTH_FILES[2]);
        let mut w = store::create(&p)?;
        write_station_metadata(&self.station_meta(), &mut w).map_err(io(&p))?;
        w.flush().map_err(io(&p))?;

        let p = path(SYNTH_FILES[3]);
        let doc = serde_json::to_string_pretty(&self.regions.to_geojson()).expect("geojson");
        std::fs::write(&p, doc + "\n").map_err(io(&p))?;

        let p = path(SYNTH_FILES[4]);
        store::write_covariates(&p, &self.covariates)?;

        Ok(Inputs {
            ghcnd: path(SYNTH_FILES[0]),
            ghcnm: path(SYNTH_FILES[1]),
            stations: path(SYNTH_FILES[2]),
            regions: path(SYNTH_FILES[3]),
            covariates: Some(path(SYNTH_FILES[4])),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec {
            pairs: 2,
            uc_stations: 4,
            nonuc_stations: 5,
            start_year: 1990,
            end_year: 1995,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn same_seed_same_world() {
        let a = synth_generate(7, &small());
        let b = synth_generate(7, &small());
        assert_eq!(a.daily, b.daily);
        assert_eq!(a.monthly, b.monthly);
        assert_eq!(a.covariates, b.covariates);
        let c = synth_generate(8, &small());
        assert_ne!(a.daily, c.daily);
    }

    #[test]
    fn stations_fall_in_their_regions() {
        let w = synth_generate(1, &small());
        assert_eq!(w.stations.len(), 18);
        for s in &w.stations {
            let a = crate::geo::assign_station_region(&s.meta, &w.regions);
            assert_eq!(a.cr.as_deref(), Some(cr_name(s.pair).as_str()));
            match s.placement {
                Placement::Uc => assert_eq!(a.uc.as_deref(), Some(uc_name(s.pair).as_str())),
                Placement::NonUc => assert_eq!(a.uc, None),
            }
        }
    }

    #[test]
    fn monthly_means_follow_daily() {
        let spec = SynthSpec {
            gaps: GapSpec {
                daily_start_prob: 0.0,
                monthly_start_prob: 0.0,
                ..GapSpec::default()
            },
            ..small()
        };
        let w = synth_generate(3, &spec);
        let tmax = &w.daily[0];
        let m = w.monthly.iter().find(|m| m.element == MonthlyElement::Tmax).unwrap();
        let jan: f64 = tmax.values[..31].iter().map(|v| v.unwrap()).sum::<f64>() / 31.0;
        assert!((m.values[0].unwrap() - jan).abs() <= 0.005 + 1e-12);
        let tavg = w.monthly.iter().find(|m| m.element == MonthlyElement::Tavg).unwrap();
        let tmin = &w.monthly[0];
        assert!((tavg.values[5].unwrap() - (m.values[5].unwrap() + tmin.values[5].unwrap()) / 2.0).abs() < 0.011);
    }

    #[test]
    fn gap_process_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = gap_mask(&mut rng, 200_000, 0.01, 4.0);
        let frac = g.iter().filter(|&&x| x).count() as f64 / g.len() as f64;
        // stationary fraction p·L / (1 + p·L) for start prob p, mean length L
        let expect = 0.04 / 1.04;
        assert!((frac - expect).abs() < 0.005, "{frac}");
        assert!(gap_mask(&mut rng, 100, 0.0, 3.0).iter().all(|&x| !x));
    }

    #[test]
    fn spec_validation() {
        assert!(SynthSpec::default().validate().is_ok());
        for bad in [
            SynthSpec { pairs: 0, ..SynthSpec::default() },
            SynthSpec { start_year: 2000, end_year: 1999, ..SynthSpec::default() },
            SynthSpec { daily_noise_sd: -1.0, ..SynthSpec::default() },
            SynthSpec {
                gaps: GapSpec { daily_mean_len: 0.5, ..GapSpec::default() },
                ..SynthSpec::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
