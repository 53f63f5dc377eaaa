//! The UC versus non-UC test battery on completed station series.
//!
//! Every function here is pure; cells are computed in parallel and returned
//! in (pair, metric) order.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geo::Covariate;
use crate::indices::regional_annual_series;
use crate::stats::{
    by_fdr_adjust, equal_proportions_test, field_significance, mann_kendall, median,
    regional_mann_kendall, sen_slope, spearman, wilcoxon_ranksum, RankSumMethod,
};
use crate::{AnnualSeries, ExplanatoryVars, Metric, RegionPair, Season};

/// Fewest annual values a group needs for a median comparison.
pub const MIN_MEDIAN_YEARS: usize = 5;
/// Correlations over fewer pairs than this are flagged.
pub const MIN_CORRELATION_PAIRS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "UC")]
    Uc,
    #[serde(rename = "nonUC")]
    NonUc,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::Uc, Group::NonUc];

    pub fn label(self) -> &'static str {
        match self {
            Group::Uc => "UC",
            Group::NonUc => "nonUC",
        }
    }

    pub fn members(self, pair: &RegionPair) -> &[String] {
        match self {
            Group::Uc => &pair.uc_stations,
            Group::NonUc => &pair.nonuc_stations,
        }
    }

    /// Key of the group's regional series, e.g. `NE:UC`.
    pub fn key(self, pair: &RegionPair) -> String {
        format!("{}:{}", pair.uc_id, self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "UC-higher")]
    UcHigher,
    #[serde(rename = "nonUC-higher")]
    NonUcHigher,
    #[serde(rename = "not-significant")]
    NotSignificant,
    #[serde(rename = "insufficient-data")]
    InsufficientData,
}

impl Direction {
    /// Significant directions only.
    pub fn is_significant(self) -> bool {
        matches!(self, Direction::UcHigher | Direction::NonUcHigher)
    }

    fn from_sign(p: f64, alpha: f64, uc_minus_nonuc: f64) -> Self {
        if p < alpha && uc_minus_nonuc > 0.0 {
            Direction::UcHigher
        } else if p < alpha && uc_minus_nonuc < 0.0 {
            Direction::NonUcHigher
        } else {
            Direction::NotSignificant
        }
    }
}

type SeriesIndex<'a> = BTreeMap<(&'a str, Metric), &'a AnnualSeries>;

fn index(series: &[AnnualSeries]) -> SeriesIndex<'_> {
    series.iter().map(|s| ((s.key.as_str(), s.metric), s)).collect()
}

fn cells(pairs: &[RegionPair], metrics: &[Metric]) -> Vec<(usize, Metric)> {
    (0..pairs.len())
        .flat_map(|p| metrics.iter().map(move |&m| (p, m)))
        .collect()
}

/// Regional annual series for both groups of every pair, `UC` before
/// `nonUC`. Groups without data give empty series.
pub fn regional_series(
    pairs: &[RegionPair],
    station_series: &[AnnualSeries],
    metrics: &[Metric],
) -> Vec<AnnualSeries> {
    let idx = index(station_series);
    let mut out = Vec::new();
    for (p, metric) in cells(pairs, metrics) {
        let pair = &pairs[p];
        for g in Group::BOTH {
            let members: Vec<&AnnualSeries> = g
                .members(pair)
                .iter()
                .filter_map(|id| idx.get(&(id.as_str(), metric)).copied())
                .collect();
            out.push(regional_annual_series(g.key(pair), metric, &members));
        }
    }
    out
}

// ------------------------------------------------------------------ medians

/// Medians of the two regional series and their rank-sum comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianComparison {
    pub pair: String,
    pub metric: String,
    pub season: Season,
    pub n_uc: usize,
    pub n_nonuc: usize,
    pub median_uc: Option<f64>,
    pub median_nonuc: Option<f64>,
    pub median_diff: Option<f64>,
    /// Rank sum of the UC values.
    pub w: Option<f64>,
    pub wilcoxon_p: Option<f64>,
    pub direction: Direction,
}

pub fn run_median_comparison(
    pairs: &[RegionPair],
    regional: &[AnnualSeries],
    metrics: &[Metric],
    alpha: f64,
) -> Vec<MedianComparison> {
    let idx = index(regional);
    let empty = Vec::new();
    cells(pairs, metrics)
        .into_par_iter()
        .map(|(p, metric)| {
            let pair = &pairs[p];
            let values = |g: Group| {
                idx.get(&(g.key(pair).as_str(), metric))
                    .map_or_else(|| empty.clone(), |s| s.data())
            };
            let (uc, non) = (values(Group::Uc), values(Group::NonUc));
            let (median_uc, median_nonuc) = (median(&uc), median(&non));
            let median_diff = median_uc.zip(median_nonuc).map(|(a, b)| a - b);
            let mut row = MedianComparison {
                pair: pair.uc_id.clone(),
                metric: metric.name().to_owned(),
                season: metric.season(),
                n_uc: uc.len(),
                n_nonuc: non.len(),
                median_uc,
                median_nonuc,
                median_diff,
                w: None,
                wilcoxon_p: None,
                direction: Direction::InsufficientData,
            };
            if uc.len() >= MIN_MEDIAN_YEARS && non.len() >= MIN_MEDIAN_YEARS {
                if let Ok(r) = wilcoxon_ranksum(&uc, &non, RankSumMethod::Auto) {
                    // location shift read off the rank sum against its null mean
                    let null_mean = uc.len() as f64 * (uc.len() + non.len() + 1) as f64 / 2.0;
                    row.w = Some(r.w);
                    row.wilcoxon_p = Some(r.p);
                    row.direction = Direction::from_sign(r.p, alpha, r.w - null_mean);
                }
            }
            row
        })
        .collect()
}

// ------------------------------------------------------------------- trends

/// Mann-Kendall result for one station, adjusted within its group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationTrend {
    pub pair: String,
    pub metric: String,
    pub season: Season,
    pub group: Group,
    pub station: String,
    pub n: usize,
    #[serde(rename = "S")]
    pub s: f64,
    pub var: f64,
    pub z: f64,
    pub p: f64,
    pub p_adj: f64,
    pub slope: f64,
    pub testable: bool,
}

/// Regional Mann-Kendall for one group, with the Sen slope of its regional
/// series. Statistic fields are empty when no station has four years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionalTrendRow {
    pub pair: String,
    pub metric: String,
    pub season: Season,
    pub group: Group,
    pub stations: usize,
    #[serde(rename = "S")]
    pub s: Option<f64>,
    pub var: Option<f64>,
    pub z: Option<f64>,
    pub p: Option<f64>,
    pub slope: Option<f64>,
    pub skipped_pairs: usize,
    pub floored: bool,
}

/// Proportions of significant station trends in each group and their
/// equal-proportions test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendComparison {
    pub pair: String,
    pub metric: String,
    pub season: Season,
    pub n_uc: usize,
    pub sig_uc: usize,
    pub prop_uc: Option<f64>,
    pub field_sig_uc: bool,
    pub n_nonuc: usize,
    pub sig_nonuc: usize,
    pub prop_nonuc: Option<f64>,
    pub field_sig_nonuc: bool,
    pub diff: Option<f64>,
    pub statistic: Option<f64>,
    pub prop_p: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub direction: Direction,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrendOutput {
    pub stations: Vec<StationTrend>,
    pub regional: Vec<RegionalTrendRow>,
    pub comparisons: Vec<TrendComparison>,
}

struct GroupTrends {
    stations: Vec<StationTrend>,
    regional: RegionalTrendRow,
    n: usize,
    n_sig: usize,
    field_significant: bool,
}

fn group_trends(
    pair: &RegionPair,
    metric: Metric,
    group: Group,
    idx: &SeriesIndex<'_>,
    regional: &SeriesIndex<'_>,
    alpha: f64,
) -> GroupTrends {
    let members: Vec<&AnnualSeries> = group
        .members(pair)
        .iter()
        .filter_map(|id| idx.get(&(id.as_str(), metric)).copied())
        .filter(|s| !s.values.is_empty())
        .collect();
    let data: Vec<(Vec<f64>, Vec<f64>)> = members.iter().map(|s| (s.years(), s.data())).collect();
    let results: Vec<_> = data.iter().map(|(t, x)| mann_kendall(t, x)).collect();
    let p_adj = by_fdr_adjust(&results.iter().map(|r| r.p).collect::<Vec<_>>());
    let summary = field_significance(group.label(), &p_adj, alpha).ok();

    let stations = members
        .iter()
        .zip(&results)
        .zip(&p_adj)
        .map(|((s, r), &p_adj)| StationTrend {
            pair: pair.uc_id.clone(),
            metric: metric.name().to_owned(),
            season: metric.season(),
            group,
            station: s.key.clone(),
            n: r.n,
            s: r.s,
            var: r.var_s,
            z: r.z,
            p: r.p,
            p_adj,
            slope: r.slope,
            testable: r.testable,
        })
        .collect();

    let views: Vec<(&[f64], &[f64])> = data.iter().map(|(t, x)| (t.as_slice(), x.as_slice())).collect();
    let rmk = regional_mann_kendall(&views).ok();
    let slope = regional
        .get(&(group.key(pair).as_str(), metric))
        .and_then(|s| sen_slope(&s.years(), &s.data()));
    let regional = RegionalTrendRow {
        pair: pair.uc_id.clone(),
        metric: metric.name().to_owned(),
        season: metric.season(),
        group,
        stations: rmk.as_ref().map_or(0, |r| r.stations),
        s: rmk.as_ref().map(|r| r.s),
        var: rmk.as_ref().map(|r| r.var),
        z: rmk.as_ref().map(|r| r.z),
        p: rmk.as_ref().map(|r| r.p),
        slope,
        skipped_pairs: rmk.as_ref().map_or(0, |r| r.skipped_pairs),
        floored: rmk.as_ref().is_some_and(|r| r.floored),
    };
    GroupTrends {
        stations,
        regional,
        n: summary.as_ref().map_or(0, |s| s.n),
        n_sig: summary.as_ref().map_or(0, |s| s.n_sig),
        field_significant: summary.is_some_and(|s| s.field_significant),
    }
}

/// Station Mann-Kendall per group, adjusted within the group, then the
/// equal-proportions test of significant-trend shares, UC against non-UC.
pub fn run_trend_comparison(
    pairs: &[RegionPair],
    station_series: &[AnnualSeries],
    regional: &[AnnualSeries],
    metrics: &[Metric],
    alpha: f64,
) -> TrendOutput {
    let idx = index(station_series);
    let ridx = index(regional);
    let per_cell: Vec<(GroupTrends, GroupTrends, TrendComparison)> = cells(pairs, metrics)
        .into_par_iter()
        .map(|(p, metric)| {
            let pair = &pairs[p];
            let uc = group_trends(pair, metric, Group::Uc, &idx, &ridx, alpha);
            let non = group_trends(pair, metric, Group::NonUc, &idx, &ridx, alpha);
            let prop = |g: &GroupTrends| (g.n > 0).then(|| g.n_sig as f64 / g.n as f64);
            let test = equal_proportions_test(uc.n_sig as u64, uc.n as u64, non.n_sig as u64, non.n as u64).ok();
            let direction = match &test {
                Some(t) => Direction::from_sign(t.p, alpha, t.diff),
                None => Direction::InsufficientData,
            };
            let cmp = TrendComparison {
                pair: pair.uc_id.clone(),
                metric: metric.name().to_owned(),
                season: metric.season(),
                n_uc: uc.n,
                sig_uc: uc.n_sig,
                prop_uc: prop(&uc),
                field_sig_uc: uc.field_significant,
                n_nonuc: non.n,
                sig_nonuc: non.n_sig,
                prop_nonuc: prop(&non),
                field_sig_nonuc: non.field_significant,
                diff: test.map(|t| t.diff),
                statistic: test.map(|t| t.statistic),
                prop_p: test.map(|t| t.p),
                ci_low: test.map(|t| t.ci_low),
                ci_high: test.map(|t| t.ci_high),
                direction,
            };
            (uc, non, cmp)
        })
        .collect();
    let mut out = TrendOutput::default();
    for (uc, non, cmp) in per_cell {
        for g in [uc, non] {
            out.stations.extend(g.stations);
            out.regional.push(g.regional);
        }
        out.comparisons.push(cmp);
    }
    out
}

// -------------------------------------------------------------- correlation

/// `fig4a` correlates UC values, `fig4b` UC minus non-UC differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Matrix {
    #[serde(rename = "fig4a")]
    UcAbsolute,
    #[serde(rename = "fig4b")]
    UcMinusNonUc,
}

/// Which summary of a regional series enters a correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Summary {
    /// Median over the study years.
    Level,
    /// Theil-Sen slope, per year.
    Trend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationStatus {
    Ok,
    /// Computed over fewer than [`MIN_CORRELATION_PAIRS`] pairs.
    LowN,
    /// Fewer than three pairs, or a constant input.
    Undefined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    pub matrix: Matrix,
    pub summary: Summary,
    pub metric: String,
    pub variable: String,
    pub n: usize,
    pub rho: Option<f64>,
    pub p: Option<f64>,
    pub status: CorrelationStatus,
}

fn summarize(s: Option<&&AnnualSeries>, summary: Summary) -> Option<f64> {
    let s = s?;
    match summary {
        Summary::Level => (s.values.len() >= MIN_MEDIAN_YEARS)
            .then(|| median(&s.data()))
            .flatten(),
        Summary::Trend => (s.values.len() >= 4)
            .then(|| sen_slope(&s.years(), &s.data()))
            .flatten(),
    }
}

/// Spearman correlations between per-pair metric summaries and the
/// explanatory variables. Pairs missing either value are left out of that
/// cell only.
pub fn run_rank_correlation(
    pairs: &[RegionPair],
    regional: &[AnnualSeries],
    covariates: &BTreeMap<String, ExplanatoryVars>,
    metrics: &[Metric],
) -> Vec<CorrelationCell> {
    let idx = index(regional);
    let mut jobs = Vec::new();
    for matrix in [Matrix::UcAbsolute, Matrix::UcMinusNonUc] {
        for summary in [Summary::Level, Summary::Trend] {
            for &metric in metrics {
                for var in Covariate::ALL {
                    jobs.push((matrix, summary, metric, var));
                }
            }
        }
    }
    jobs.into_par_iter()
        .map(|(matrix, summary, metric, var)| {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for pair in pairs {
                let get = |g: Group| summarize(idx.get(&(g.key(pair).as_str(), metric)), summary);
                let value = match matrix {
                    Matrix::UcAbsolute => get(Group::Uc),
                    Matrix::UcMinusNonUc => get(Group::Uc).zip(get(Group::NonUc)).map(|(a, b)| a - b),
                };
                let cov = covariates.get(&pair.uc_id).and_then(|c| c.get(var));
                if let (Some(v), Some(c)) = (value, cov) {
                    xs.push(v);
                    ys.push(c);
                }
            }
            let n = xs.len();
            let (rho, p, status) = match spearman(&xs, &ys) {
                Ok(r) if n >= MIN_CORRELATION_PAIRS => (Some(r.rho), Some(r.p), CorrelationStatus::Ok),
                Ok(r) => (Some(r.rho), Some(r.p), CorrelationStatus::LowN),
                Err(_) => (None, None, CorrelationStatus::Undefined),
            };
            CorrelationCell {
                matrix,
                summary,
                metric: metric.code(),
                variable: var.column().to_owned(),
                n,
                rho,
                p,
                status,
            }
        })
        .collect()
}
