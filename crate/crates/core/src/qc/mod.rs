//! Station retention rules and gap imputation.

mod filters;
mod geodesy;
mod gwr;
mod impute;
mod kriging;
mod lwma;
mod variogram;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filters::{
    filter_daily_stations, filter_monthly_stations, LengthRule, QcReason, QcReport, QcThresholds,
    Verdict,
};
pub use geodesy::great_circle_km;
pub use gwr::{gwr_fit_predict, GwrConfig, GwrFit, TargetSite, TrainSite};
pub use impute::{impute_monthly, ImputeConfig, ImputedMonthly, KrigingOutcome, TimestepNote};
pub use kriging::{ordinary_krige, KrigeEstimate, KrigeMethod, Kriger};
pub use lwma::{lwma_fill, FilledDaily};
pub use variogram::{empirical_variogram, fit_variogram, ResidualSite, Variogram, VariogramBin};

#[derive(Debug, Error, PartialEq)]
pub enum QcError {
    #[error("study window {0} is empty")]
    EmptyWindow(StudyWindow),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{have} training stations, need at least {need}")]
    InsufficientTraining { have: usize, need: usize },
    #[error("variogram needs at least 5 distinct site pairs, got {0}")]
    InsufficientPairs(usize),
    #[error("kriging needs a non-degenerate variogram")]
    DegenerateVariogram,
    #[error("kriging needs at least one site")]
    NoSites,
    #[error("no metadata for station `{0}`")]
    UnknownStation(String),
    #[error("imputation expects one element per call, found {0} and {1}")]
    MixedElements(String, String),
}

/// Study period, January of `start_year` through December of `end_year`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyWindow {
    pub start_year: i32,
    pub end_year: i32,
}

impl Default for StudyWindow {
    fn default() -> Self {
        StudyWindow {
            start_year: 1956,
            end_year: 2015,
        }
    }
}

impl StudyWindow {
    pub fn is_empty(&self) -> bool {
        self.end_year < self.start_year
    }

    pub fn years(&self) -> std::ops::RangeInclusive<i32> {
        self.start_year..=self.end_year
    }

    pub fn months(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            (self.end_year - self.start_year + 1) as usize * 12
        }
    }

    pub fn first_month(&self) -> crate::YearMonth {
        crate::YearMonth::new(self.start_year, 1)
    }

    pub fn contains_year(&self, year: i32) -> bool {
        self.years().contains(&year)
    }
}

impl fmt::Display for StudyWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start_year, self.end_year)
    }
}

/// Provenance of one slot of a completed series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotStatus {
    Observed,
    Imputed,
    Unimputable,
}

impl SlotStatus {
    pub fn code(self) -> char {
        match self {
            SlotStatus::Observed => 'O',
            SlotStatus::Imputed => 'I',
            SlotStatus::Unimputable => 'U',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'O' => Some(SlotStatus::Observed),
            'I' => Some(SlotStatus::Imputed),
            'U' => Some(SlotStatus::Unimputable),
            _ => None,
        }
    }
}
