//! End-to-end runs: configuration, synthetic worlds, the UC/non-UC test
//! battery, file-backed stages and the report bundle.

mod analysis;
mod config;
mod report;
mod stages;
pub mod store;
mod synth;

use std::path::PathBuf;

use thiserror::Error;

pub use analysis::{
    regional_series, run_median_comparison, run_rank_correlation, run_trend_comparison,
    CorrelationCell, CorrelationStatus, Direction, Group, Matrix, MedianComparison,
    RegionalTrendRow, StationTrend, Summary, TrendComparison, TrendOutput,
    MIN_CORRELATION_PAIRS, MIN_MEDIAN_YEARS,
};
pub use config::{Inputs, RunConfig, Variable};
pub use report::{figure_rows, FigureRow, FileDigest, Manifest, MANIFEST};
pub use stages::{
    analyze, fill_daily, impute, ingest, qc, qc_daily, resolve_inputs, run_all, run_in_memory,
    run_stage, run_synthetic, station_indices, Analysis, Completed, Ingested, ParseIssue, QcOutput,
    Stage,
};
pub use synth::{
    climatology, cr_name, synth_generate, uc_name, GapSpec, Placement, SynthSpec, SynthStation,
    SynthWorld, SYNTH_FILES,
};

/// Problems with how a run was requested, as opposed to problems in the
/// data it reads.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Parse(#[source] serde_json::Error),
    #[error("config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Invalid(String),
}
