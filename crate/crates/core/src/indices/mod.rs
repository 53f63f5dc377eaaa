//! Seasonal temperature means, annual heat-wave indices and their regional
//! averages.
//!
//! The three heat indices are computed per calendar year from gap-filled
//! daily series; a year contributes only if every day it needs is present.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::qc::StudyWindow;
use crate::{DailySeries, Error, MonthlyElement, MonthlySeries, Result, YearMonth};

/// Default CDD base temperature (75 °F).
pub const CDD_BASE_C: f64 = 23.89;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Season {
    #[serde(rename = "DJF")]
    Djf,
    #[serde(rename = "JJA")]
    Jja,
    /// Whole calendar year; used by the daily heat indices.
    #[serde(rename = "ANN")]
    Ann,
}

impl Season {
    pub fn code(self) -> &'static str {
        match self {
            Season::Djf => "DJF",
            Season::Jja => "JJA",
            Season::Ann => "ANN",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "DJF" => Some(Season::Djf),
            "JJA" => Some(Season::Jja),
            "ANN" => Some(Season::Ann),
            _ => None,
        }
    }

    /// Months making up the season labelled `year`; DJF starts the December
    /// before.
    pub fn months(self, year: i32) -> Vec<YearMonth> {
        match self {
            Season::Djf => vec![
                YearMonth::new(year - 1, 12),
                YearMonth::new(year, 1),
                YearMonth::new(year, 2),
            ],
            Season::Jja => (6..=8).map(|m| YearMonth::new(year, m)).collect(),
            Season::Ann => (1..=12).map(|m| YearMonth::new(year, m)).collect(),
        }
    }
}

impl fmt::Display for Season {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One analysed quantity: a seasonal mean of a monthly element or one of the
/// daily heat indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Temp(MonthlyElement, Season),
    /// Cooling degree days, °C·day
    Cdd,
    /// Warmest three-night mean of daily minima, °C
    Cnm,
    /// 95th percentile of daily maxima, °C
    P95,
}

impl Metric {
    pub const TEMPERATURES: [Metric; 6] = [
        Metric::Temp(MonthlyElement::Tmin, Season::Djf),
        Metric::Temp(MonthlyElement::Tmin, Season::Jja),
        Metric::Temp(MonthlyElement::Tavg, Season::Djf),
        Metric::Temp(MonthlyElement::Tavg, Season::Jja),
        Metric::Temp(MonthlyElement::Tmax, Season::Djf),
        Metric::Temp(MonthlyElement::Tmax, Season::Jja),
    ];
    pub const HEAT: [Metric; 3] = [Metric::Cdd, Metric::Cnm, Metric::P95];

    pub fn all() -> impl Iterator<Item = Metric> {
        Self::TEMPERATURES.into_iter().chain(Self::HEAT)
    }

    /// Variable name without the season: `TMIN`, `CDD`, ...
    pub fn name(self) -> &'static str {
        match self {
            Metric::Temp(e, _) => e.code(),
            Metric::Cdd => "CDD",
            Metric::Cnm => "CNM",
            Metric::P95 => "P95",
        }
    }

    pub fn season(self) -> Season {
        match self {
            Metric::Temp(_, s) => s,
            _ => Season::Ann,
        }
    }

    /// `TMIN_JJA`, `CDD`, ...
    pub fn code(self) -> String {
        match self {
            Metric::Temp(e, s) => format!("{}_{}", e.code(), s.code()),
            other => other.name().to_owned(),
        }
    }

    pub fn from_parts(name: &str, season: Season) -> Option<Self> {
        match (name, season) {
            ("CDD", Season::Ann) => Some(Metric::Cdd),
            ("CNM", Season::Ann) => Some(Metric::Cnm),
            ("P95", Season::Ann) => Some(Metric::P95),
            (_, Season::Ann) => None,
            (e, s) => MonthlyElement::from_code(e).map(|e| Metric::Temp(e, s)),
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code.split_once('_') {
            Some((name, season)) => Metric::from_parts(name, Season::from_code(season)?),
            None => Metric::from_parts(code, Season::Ann),
        }
    }

    pub fn is_heat_index(self) -> bool {
        !matches!(self, Metric::Temp(..))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

impl Serialize for Metric {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.code())
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let code = String::deserialize(d)?;
        Metric::from_code(&code)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown metric `{code}`")))
    }
}

/// Seasonal mean for one station.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalValue {
    pub station: String,
    pub year: i32,
    pub season: Season,
    pub element: MonthlyElement,
    pub value: f64,
}

/// Yearly values keyed by a station id or a group label.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnualSeries {
    pub key: String,
    pub metric: Metric,
    pub values: BTreeMap<i32, f64>,
}

impl AnnualSeries {
    pub fn new(key: impl Into<String>, metric: Metric) -> Self {
        AnnualSeries {
            key: key.into(),
            metric,
            values: BTreeMap::new(),
        }
    }

    pub fn years(&self) -> Vec<f64> {
        self.values.keys().map(|&y| y as f64).collect()
    }

    pub fn data(&self) -> Vec<f64> {
        self.values.values().copied().collect()
    }
}

/// DJF and JJA means for every window year whose three months are present.
pub fn seasonal_means(series: &MonthlySeries, window: StudyWindow) -> Vec<SeasonalValue> {
    let mut out = Vec::new();
    for season in [Season::Djf, Season::Jja] {
        for year in window.years() {
            let months = season.months(year);
            let vals: Option<Vec<f64>> = months.iter().map(|&m| series.get(m)).collect();
            if let Some(v) = vals {
                out.push(SeasonalValue {
                    station: series.station.clone(),
                    year,
                    season,
                    element: series.element,
                    value: (v[0] + v[1] + v[2]) / 3.0,
                });
            }
        }
    }
    out
}

/// Seasonal means as annual series, one per season.
pub fn seasonal_series(series: &MonthlySeries, window: StudyWindow) -> Vec<AnnualSeries> {
    let mut djf = AnnualSeries::new(&series.station, Metric::Temp(series.element, Season::Djf));
    let mut jja = AnnualSeries::new(&series.station, Metric::Temp(series.element, Season::Jja));
    for v in seasonal_means(series, window) {
        match v.season {
            Season::Djf => djf.values.insert(v.year, v.value),
            _ => jja.values.insert(v.year, v.value),
        };
    }
    vec![djf, jja]
}

/// Sum of `max(0, (tmax + tmin) / 2 - base)` over paired days.
pub fn annual_cdd(tmax: &[f64], tmin: &[f64], base: f64) -> f64 {
    debug_assert_eq!(tmax.len(), tmin.len());
    tmax.iter()
        .zip(tmin)
        .map(|(hi, lo)| ((hi + lo) / 2.0 - base).max(0.0))
        .sum()
}

/// Largest mean over three consecutive nights; `None` for fewer than three.
pub fn annual_cnm(tmin: &[f64]) -> Option<f64> {
    tmin.windows(3)
        .map(|w| (w[0] + w[1] + w[2]) / 3.0)
        .max_by(f64::total_cmp)
}

/// 95th percentile with linear interpolation between order statistics at
/// 1-based rank `0.95 (n - 1) + 1`.
pub fn annual_p95(tmax: &[f64]) -> Option<f64> {
    percentile(tmax, 0.95)
}

pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut x = values.to_vec();
    x.sort_by(f64::total_cmp);
    let h = q * (x.len() - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    Some(if lo + 1 < x.len() {
        x[lo] + frac * (x[lo + 1] - x[lo])
    } else {
        x[lo]
    })
}

/// CDD, CNM and P95 per window year for one station. CDD needs both
/// elements, CNM needs TMIN, P95 needs TMAX; each year is kept only when the
/// required series are complete for it.
pub fn heat_indices(
    station: &str,
    tmax: Option<&DailySeries>,
    tmin: Option<&DailySeries>,
    window: StudyWindow,
    cdd_base: f64,
) -> [AnnualSeries; 3] {
    let mut cdd = AnnualSeries::new(station, Metric::Cdd);
    let mut cnm = AnnualSeries::new(station, Metric::Cnm);
    let mut p95 = AnnualSeries::new(station, Metric::P95);
    for year in window.years() {
        let hi = tmax.and_then(|s| s.complete_year(year));
        let lo = tmin.and_then(|s| s.complete_year(year));
        if let (Some(hi), Some(lo)) = (&hi, &lo) {
            cdd.values.insert(year, annual_cdd(hi, lo, cdd_base));
        }
        if let Some(v) = lo.as_deref().and_then(annual_cnm) {
            cnm.values.insert(year, v);
        }
        if let Some(v) = hi.as_deref().and_then(annual_p95) {
            p95.values.insert(year, v);
        }
    }
    [cdd, cnm, p95]
}

/// Per-year unweighted mean over the members reporting that year, summed in
/// member-key order. An empty group gives an empty series.
pub fn regional_annual_series(
    key: impl Into<String>,
    metric: Metric,
    members: &[&AnnualSeries],
) -> AnnualSeries {
    let mut sorted: Vec<&AnnualSeries> = members.to_vec();
    sorted.sort_by(|a, b| a.key.cmp(&b.key));
    let mut acc: BTreeMap<i32, (f64, usize)> = BTreeMap::new();
    for m in sorted {
        for (&year, &v) in &m.values {
            let e = acc.entry(year).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    AnnualSeries {
        key: key.into(),
        metric,
        values: acc
            .into_iter()
            .map(|(y, (sum, n))| (y, sum / n as f64))
            .collect(),
    }
}

pub const ANNUAL_HEADER: [&str; 4] = ["key", "metric", "year", "value"];

/// Writes `key,metric,year,value` rows with 17 significant digits.
pub fn write_annual_csv<W: Write>(series: &[AnnualSeries], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ANNUAL_HEADER)?;
    for s in series {
        let metric = s.metric.code();
        for (year, v) in &s.values {
            w.write_record([
                s.key.as_str(),
                &metric,
                &year.to_string(),
                &format!("{v:.16e}"),
            ])?;
        }
    }
    w.flush()
}

/// Reads rows written by [`write_annual_csv`], grouping consecutive rows
/// with the same key and metric.
pub fn read_annual_csv<R: Read>(input: R, path: &Path) -> Result<Vec<AnnualSeries>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| Error::csv(path, e))?.clone();
    if header.iter().ne(ANNUAL_HEADER) {
        return Err(Error::data(path, format!("expected header `{}`", ANNUAL_HEADER.join(","))));
    }
    let mut out: Vec<AnnualSeries> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let bad = |what: &str| Error::data(path, format!("row {}: bad {what}", i + 2));
        let metric = Metric::from_code(&rec[1]).ok_or_else(|| bad("metric"))?;
        let year: i32 = rec[2].parse().map_err(|_| bad("year"))?;
        let value: f64 = rec[3].parse().map_err(|_| bad("value"))?;
        let key = &rec[0];
        match out.last_mut() {
            Some(last) if last.key == key && last.metric == metric => {}
            _ => out.push(AnnualSeries::new(key, metric)),
        }
        if out.last_mut().unwrap().values.insert(year, value).is_some() {
            return Err(bad("year (duplicate)"));
        }
    }
    Ok(out)
}
