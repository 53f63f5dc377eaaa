//! Urban-corridor heat analysis.
//!
//! The crate is organised as the analysis runs:
//!
//! * [`geo`] parses GHCN station records, the station inventory, region
//!   geometry and covariate tables, and groups stations into urban-corridor
//!   (UC) / non-UC pairs.
//! * [`qc`] applies the station-retention rules and fills gaps: per-timestep
//!   geographically weighted regression plus residual ordinary kriging for
//!   monthly data, linearly weighted moving averages for daily data.
//! * [`indices`] turns completed series into seasonal means and the three
//!   annual heat-wave indices (CDD, CNM, P95), and averages them per group.
//! * [`stats`] holds the inferential tests.
//! * [`pipeline`] wires everything into restartable, file-backed stages and
//!   generates synthetic worlds for end-to-end checks.

pub mod error;
pub mod geo;
pub mod indices;
pub mod pipeline;
pub mod qc;
pub mod stats;

pub use error::{Error, Result};
pub use geo::{
    DailyElement, DailySeries, ExplanatoryVars, MonthlyElement, MonthlySeries, RegionPair,
    RegionSet, StationMeta, YearMonth,
};
pub use indices::{AnnualSeries, Metric, Season};
pub use qc::{GwrConfig, QcReport, QcThresholds, SlotStatus, StudyWindow, Variogram};
pub use stats::{GroupTrendSummary, TrendResult};
