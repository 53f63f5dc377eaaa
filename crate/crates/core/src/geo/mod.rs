//! Station records, region geometry and covariates.

mod covariates;
mod ghcn;
mod inventory;
mod pairing;
mod regions;

use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use covariates::{load_explanatory_vars, Covariate, ExplanatoryVars, COVARIATE_HEADER};
pub use ghcn::{
    parse_ghcnd, parse_ghcnd_file, parse_ghcnm, parse_ghcnm_file, write_ghcnd, write_ghcnm,
    LineError, LineErrorKind, Parsed, GHCND_LINE_LEN, GHCNM_LINE_LEN, MISSING_VALUE,
};
pub use inventory::{parse_station_metadata, write_station_metadata, MISSING_ELEVATION};
pub use pairing::{assign_station_region, pair_uc_nonuc, Assignment, PairWarning};
pub use regions::{load_regions, Polygon, Region, RegionKind, RegionSet};

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("region geometry: {0}")]
    Geometry(String),
    #[error("duplicate {kind} name `{name}`")]
    DuplicateRegion { kind: RegionKind, name: String },
    #[error("region `{name}`: ring {ring} is not closed")]
    UnclosedRing { name: String, ring: usize },
    #[error("unknown region kind `{0}`")]
    UnknownKind(String),
    #[error("UC `{0}` does not overlap any climate region")]
    UcOutsideRegions(String),
    #[error("covariates: {0}")]
    Covariates(String),
    #[error("covariates: no row for UC `{0}`")]
    MissingCovariateRow(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationMeta {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub elevation_m: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DailyElement {
    #[serde(rename = "TMAX")]
    Tmax,
    #[serde(rename = "TMIN")]
    Tmin,
}

impl DailyElement {
    pub fn code(self) -> &'static str {
        match self {
            DailyElement::Tmax => "TMAX",
            DailyElement::Tmin => "TMIN",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "TMAX" => Some(DailyElement::Tmax),
            "TMIN" => Some(DailyElement::Tmin),
            _ => None,
        }
    }
}

impl fmt::Display for DailyElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MonthlyElement {
    #[serde(rename = "TMIN")]
    Tmin,
    #[serde(rename = "TAVG")]
    Tavg,
    #[serde(rename = "TMAX")]
    Tmax,
}

impl MonthlyElement {
    pub const ALL: [MonthlyElement; 3] = [
        MonthlyElement::Tmin,
        MonthlyElement::Tavg,
        MonthlyElement::Tmax,
    ];

    pub fn code(self) -> &'static str {
        match self {
            MonthlyElement::Tmin => "TMIN",
            MonthlyElement::Tavg => "TAVG",
            MonthlyElement::Tmax => "TMAX",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "TMIN" => Some(MonthlyElement::Tmin),
            "TAVG" => Some(MonthlyElement::Tavg),
            "TMAX" => Some(MonthlyElement::Tmax),
            _ => None,
        }
    }
}

impl fmt::Display for MonthlyElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// A calendar month, ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    /// 1..=12
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Self {
        debug_assert!((1..=12).contains(&month));
        YearMonth { year, month }
    }

    /// Months since year 0, usable for differences and offsets.
    pub fn index(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_index(index: i64) -> Self {
        YearMonth {
            year: index.div_euclid(12) as i32,
            month: index.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn of(date: NaiveDate) -> Self {
        YearMonth::new(date.year(), date.month())
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid month")
    }

    pub fn days(self) -> u32 {
        days_in_month(self.year, self.month)
    }

    pub fn offset(self, months: i64) -> Self {
        YearMonth::from_index(self.index() + months)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

pub fn is_leap_year(year: i32) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

pub fn days_in_month(year: i32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap_year(year) => 29,
        2 => 28,
        _ => panic!("month out of range: {month}"),
    }
}

/// Daily temperatures (°C) for one station and element, one slot per day
/// from `start` onwards. `None` marks a missing day.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    pub station: String,
    pub element: DailyElement,
    pub start: NaiveDate,
    pub values: Vec<Option<f64>>,
}

impl DailySeries {
    pub fn end(&self) -> NaiveDate {
        self.date_at(self.values.len().saturating_sub(1))
    }

    pub fn date_at(&self, index: usize) -> NaiveDate {
        self.start + chrono::Days::new(index as u64)
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start).num_days();
        (offset >= 0 && (offset as usize) < self.values.len()).then_some(offset as usize)
    }

    pub fn get(&self, date: NaiveDate) -> Option<f64> {
        self.index_of(date).and_then(|i| self.values[i])
    }

    /// Slot range covering the calendar year, if the series spans all of it.
    pub fn year_range(&self, year: i32) -> Option<std::ops::Range<usize>> {
        let first = self.index_of(NaiveDate::from_ymd_opt(year, 1, 1)?)?;
        let last = self.index_of(NaiveDate::from_ymd_opt(year, 12, 31)?)?;
        Some(first..last + 1)
    }

    /// All values of the calendar year, or `None` unless every day is present.
    pub fn complete_year(&self, year: i32) -> Option<Vec<f64>> {
        let range = self.year_range(year)?;
        self.values[range].iter().copied().collect()
    }

    pub fn first_observed(&self) -> Option<NaiveDate> {
        self.values
            .iter()
            .position(Option::is_some)
            .map(|i| self.date_at(i))
    }

    pub fn last_observed(&self) -> Option<NaiveDate> {
        self.values
            .iter()
            .rposition(Option::is_some)
            .map(|i| self.date_at(i))
    }
}

/// Monthly temperatures (°C), contiguous months from `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlySeries {
    pub station: String,
    pub element: MonthlyElement,
    pub start: YearMonth,
    pub values: Vec<Option<f64>>,
}

impl MonthlySeries {
    pub fn end(&self) -> YearMonth {
        self.start
            .offset(self.values.len().saturating_sub(1) as i64)
    }

    pub fn index_of(&self, ym: YearMonth) -> Option<usize> {
        let offset = ym.index() - self.start.index();
        (offset >= 0 && (offset as usize) < self.values.len()).then_some(offset as usize)
    }

    pub fn get(&self, ym: YearMonth) -> Option<f64> {
        self.index_of(ym).and_then(|i| self.values[i])
    }
}

/// One urban corridor and the non-urban remainder of its host climate region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPair {
    pub uc_id: String,
    pub cr_id: String,
    pub uc_stations: Vec<String>,
    pub nonuc_stations: Vec<String>,
    pub warning: Option<PairWarning>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn year_month_index_round_trips() {
        for idx in [0_i64, 1, 11, 12, 23_471, 24_179] {
            assert_eq!(YearMonth::from_index(idx).index(), idx);
        }
        assert_eq!(YearMonth::new(1955, 12).offset(1), YearMonth::new(1956, 1));
    }

    #[test]
    fn month_lengths() {
        assert_eq!(days_in_month(1960, 2), 29);
        assert_eq!(days_in_month(1900, 2), 28);
        assert_eq!(days_in_month(2000, 2), 29);
        assert_eq!(days_in_month(1961, 4), 30);
    }

    #[test]
    fn complete_year_requires_every_day() {
        let start = NaiveDate::from_ymd_opt(1990, 1, 1).unwrap();
        let mut s = DailySeries {
            station: "X".into(),
            element: DailyElement::Tmax,
            start,
            values: vec![Some(1.0); 365],
        };
        assert_eq!(s.complete_year(1990).unwrap().len(), 365);
        s.values[100] = None;
        assert!(s.complete_year(1990).is_none());
        assert!(s.complete_year(1991).is_none());
    }
}
