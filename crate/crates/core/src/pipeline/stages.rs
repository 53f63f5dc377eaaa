//! Stage functions, in memory and file-backed.
//!
//! Each file-backed stage reads only what earlier stages wrote under the
//! output directory, so any stage can be re-run on its own:
//!
//! ```text
//! out/synth/      generated inputs (synthetic runs only)
//! out/ingest/     stations.csv pairs.json parse_errors.csv daily.csv monthly.csv covariates.csv
//! out/qc/         qc_daily_<EL>.csv qc_monthly_<EL>.csv daily.csv monthly.csv
//! out/impute/     daily.csv daily_mask.csv monthly.csv monthly_mask.csv notes.csv
//! out/indices/    station_annual.csv regional_annual.csv
//! out/trends/     station_trends.csv regional_trends.csv proportions.csv
//! out/compare/    medians.csv
//! out/correlate/  fig4a.csv fig4b.csv
//! out/report/     fig*.csv manifest.json
//! ```
//!
//! Wall-clock timings go to `out/run_log.json`, outside the report bundle.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::analysis::{
    regional_series, run_median_comparison, run_rank_correlation, run_trend_comparison,
    CorrelationCell, Matrix, MedianComparison, TrendComparison, TrendOutput,
};
use super::config::{Inputs, RunConfig};
use super::report;
use super::store;
use super::synth::{synth_generate, SynthWorld};
use super::ConfigError;
use crate::geo::{
    assign_station_region, load_explanatory_vars, load_regions, pair_uc_nonuc,
    parse_ghcnd_file, parse_ghcnm_file, parse_station_metadata, LineError,
};
use crate::indices::{heat_indices, read_annual_csv, seasonal_series, write_annual_csv};
use crate::qc::{
    filter_daily_stations, filter_monthly_stations, impute_monthly, lwma_fill, KrigingOutcome,
    QcReport, TimestepNote,
};
use crate::{
    AnnualSeries, DailyElement, DailySeries, Error, ExplanatoryVars, MonthlyElement,
    MonthlySeries, RegionPair, RegionSet, Result, SlotStatus, StationMeta,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Synth,
    Ingest,
    Qc,
    Impute,
    Indices,
    Trends,
    Compare,
    Correlate,
    Report,
}

impl Stage {
    /// Every stage, in run order.
    pub const ALL: [Stage; 9] = [
        Stage::Synth,
        Stage::Ingest,
        Stage::Qc,
        Stage::Impute,
        Stage::Indices,
        Stage::Trends,
        Stage::Compare,
        Stage::Correlate,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::Qc => "qc",
            Stage::Impute => "impute",
            Stage::Indices => "indices",
            Stage::Trends => "trends",
            Stage::Compare => "compare",
            Stage::Correlate => "correlate",
            Stage::Report => "report",
        }
    }

    fn dir(self, out: &Path) -> PathBuf {
        out.join(self.name())
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A rejected input line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseIssue {
    pub file: String,
    pub line: usize,
    pub error: String,
}

/// `path` relative to `out` when it lies inside it, so bundles do not
/// depend on where the output directory lives.
pub(crate) fn display_path(path: &Path, out: &Path) -> String {
    path.strip_prefix(out)
        .unwrap_or(path)
        .to_string_lossy()
        .replace('\\', "/")
}

// ------------------------------------------------------------------- ingest

/// Parsed and paired inputs.
#[derive(Debug, Clone)]
pub struct Ingested {
    /// Sorted by id.
    pub stations: Vec<StationMeta>,
    pub pairs: Vec<RegionPair>,
    /// Sorted by station then element; whole calendar months.
    pub daily: Vec<DailySeries>,
    /// Sorted by station then element; whole calendar years.
    pub monthly: Vec<MonthlySeries>,
    pub covariates: Option<BTreeMap<String, ExplanatoryVars>>,
    pub parse_errors: Vec<ParseIssue>,
    regions: RegionSet,
}

impl Ingested {
    /// Pairs the stations and keeps only series of known stations.
    pub fn assemble(
        mut stations: Vec<StationMeta>,
        regions: RegionSet,
        mut daily: Vec<DailySeries>,
        monthly: Vec<MonthlySeries>,
    ) -> Result<Self> {
        stations.sort_by(|a, b| a.id.cmp(&b.id));
        let known = |id: &str| stations.binary_search_by(|s| s.id.as_str().cmp(id)).is_ok();
        let before = (daily.len(), monthly.len());
        daily.retain(|s| known(&s.station));
        let mut monthly: Vec<MonthlySeries> = monthly
            .into_iter()
            .filter(|s| known(&s.station))
            .map(store::whole_years)
            .collect();
        let dropped = before.0 - daily.len() + before.1 - monthly.len();
        if dropped > 0 {
            warn!("{dropped} series belong to stations missing from the inventory; ignored");
        }
        daily.sort_by(|a, b| (&a.station, a.element).cmp(&(&b.station, b.element)));
        monthly.sort_by(|a, b| (&a.station, a.element).cmp(&(&b.station, b.element)));
        let pairs = pair_uc_nonuc(&regions, &stations)?;
        for p in pairs.iter().filter(|p| p.warning.is_some()) {
            warn!("UC {} has no stations in its host region {}", p.uc_id, p.cr_id);
        }
        Ok(Ingested {
            stations,
            pairs,
            daily,
            monthly,
            covariates: None,
            parse_errors: Vec::new(),
            regions,
        })
    }

    /// Skips the text formats entirely; used by tests and benchmarks.
    pub fn from_world(world: &SynthWorld) -> Result<Self> {
        let mut ing = Self::assemble(
            world.station_meta(),
            world.regions.clone(),
            world.daily.clone(),
            world.monthly.clone(),
        )?;
        ing.covariates = Some(
            world
                .covariates
                .iter()
                .map(|c| (c.uc_id.clone(), c.clone()))
                .collect(),
        );
        Ok(ing)
    }

    pub fn regions(&self) -> &RegionSet {
        &self.regions
    }
}

/// Input files: a directory stands for every file in it with the given
/// extension, in name order.
fn expand(path: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_owned()]);
    }
    let mut files = Vec::new();
    for entry in std::fs::read_dir(path).map_err(|e| Error::io(path, e))? {
        let p = entry.map_err(|e| Error::io(path, e))?.path();
        if p.is_file() && p.extension().is_some_and(|x| x == ext) {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

fn issues(file: &Path, out: &Path, errors: Vec<LineError>) -> Vec<ParseIssue> {
    let file = display_path(file, out);
    errors
        .into_iter()
        .map(|e| ParseIssue {
            file: file.clone(),
            line: e.line,
            error: e.kind.to_string(),
        })
        .collect()
}

fn parse_all<T: Send>(
    files: &[PathBuf],
    out: &Path,
    parse: impl Fn(&Path) -> Result<crate::geo::Parsed<T>> + Sync,
) -> Result<(Vec<T>, Vec<ParseIssue>)> {
    let parsed = files
        .par_iter()
        .map(|f| parse(f).map(|p| (f, p)))
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::new();
    let mut errs = Vec::new();
    for (f, p) in parsed {
        records.extend(p.records);
        errs.extend(issues(f, out, p.errors));
    }
    Ok((records, errs))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Reads, validates and pairs every input.
pub fn ingest(inputs: &Inputs, out: &Path) -> Result<Ingested> {
    let inv = std::fs::read(&inputs.stations).map_err(|e| Error::io(&inputs.stations, e))?;
    let inv = parse_station_metadata(&inv);
    let mut parse_errors = issues(&inputs.stations, out, inv.errors);
    let regions = load_regions(&read_text(&inputs.regions)?)?;

    let (daily, e) = parse_all(&expand(&inputs.ghcnd, "dly")?, out, parse_ghcnd_file)?;
    parse_errors.extend(e);
    let (monthly, e) = parse_all(&expand(&inputs.ghcnm, "dat")?, out, parse_ghcnm_file)?;
    parse_errors.extend(e);
    for (what, keys) in [
        ("daily", daily.iter().map(|s| (s.station.as_str(), s.element.code())).collect::<Vec<_>>()),
        ("monthly", monthly.iter().map(|s| (s.station.as_str(), s.element.code())).collect()),
    ] {
        let mut keys = keys;
        keys.sort_unstable();
        if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::data(
                if what == "daily" { &inputs.ghcnd } else { &inputs.ghcnm },
                format!("{} {} appears in more than one {what} file", w[0].0, w[0].1),
            ));
        }
    }
    if !parse_errors.is_empty() {
        warn!("{} input lines rejected; see ingest/parse_errors.csv", parse_errors.len());
    }

    let mut ing = Ingested::assemble(inv.records, regions, daily, monthly)?;
    ing.parse_errors = parse_errors;
    if let Some(path) = &inputs.covariates {
        let f = store::open(path)?;
        ing.covariates = Some(load_explanatory_vars(f, &ing.pairs)?);
    }
    Ok(ing)
}

// ----------------------------------------------------------------------- qc

#[derive(Debug, Clone, Default)]
pub struct QcOutput {
    pub daily: Vec<DailySeries>,
    pub monthly: Vec<MonthlySeries>,
    /// Reports in input order.
    pub daily_reports: Vec<QcReport>,
    pub monthly_reports: Vec<QcReport>,
}

/// Daily retention, one station-element at a time in parallel.
pub fn qc_daily(daily: Vec<DailySeries>, cfg: &RunConfig) -> (Vec<DailySeries>, Vec<QcReport>) {
    let per: Vec<_> = daily
        .into_par_iter()
        .map(|s| filter_daily_stations(vec![s], cfg.window, &cfg.qc))
        .collect();
    let mut kept = Vec::new();
    let mut reports = Vec::new();
    for (k, r) in per {
        kept.extend(k);
        reports.extend(r);
    }
    (kept, reports)
}

pub fn qc(daily: Vec<DailySeries>, monthly: Vec<MonthlySeries>, cfg: &RunConfig) -> Result<QcOutput> {
    let (daily, daily_reports) = qc_daily(daily, cfg);
    let (monthly, monthly_reports) = filter_monthly_stations(monthly, cfg.window, &cfg.qc)?;
    Ok(QcOutput {
        daily,
        monthly,
        daily_reports,
        monthly_reports,
    })
}

// ------------------------------------------------------------------- impute

#[derive(Debug, Clone, Default)]
pub struct Completed {
    pub daily: Vec<DailySeries>,
    pub daily_masks: Vec<Vec<SlotStatus>>,
    /// Sorted by station then element.
    pub monthly: Vec<MonthlySeries>,
    pub monthly_masks: Vec<Vec<SlotStatus>>,
    pub notes: Vec<(MonthlyElement, TimestepNote)>,
}

/// LWMA gap filling of every daily series.
pub fn fill_daily(daily: &[DailySeries]) -> (Vec<DailySeries>, Vec<Vec<SlotStatus>>) {
    daily.par_iter().map(lwma_fill).map(|f| (f.series, f.mask)).unzip()
}

pub fn impute(
    daily: &[DailySeries],
    monthly: &[MonthlySeries],
    stations: &[StationMeta],
    cfg: &RunConfig,
) -> Result<Completed> {
    let (daily, daily_masks) = fill_daily(daily);
    let mut done: Vec<(MonthlySeries, Vec<SlotStatus>)> = Vec::new();
    let mut notes = Vec::new();
    for element in MonthlyElement::ALL {
        let of: Vec<MonthlySeries> = monthly.iter().filter(|s| s.element == element).cloned().collect();
        if of.is_empty() {
            continue;
        }
        let r = impute_monthly(&of, stations, cfg.window, &cfg.impute)?;
        done.extend(r.series.into_iter().zip(r.masks));
        notes.extend(r.notes.into_iter().map(|n| (element, n)));
    }
    done.sort_by(|a, b| (&a.0.station, a.0.element).cmp(&(&b.0.station, b.0.element)));
    let (monthly, monthly_masks) = done.into_iter().unzip();
    Ok(Completed {
        daily,
        daily_masks,
        monthly,
        monthly_masks,
        notes,
    })
}

// ------------------------------------------------------------------ indices

/// Annual station series for every configured metric, sorted by station
/// then metric. Series without any year are left out.
pub fn station_indices(
    daily: &[DailySeries],
    monthly: &[MonthlySeries],
    cfg: &RunConfig,
) -> Vec<AnnualSeries> {
    let metrics = cfg.metric_list();
    let wanted = |s: &AnnualSeries| metrics.contains(&s.metric) && !s.values.is_empty();

    let mut out: Vec<AnnualSeries> = monthly
        .par_iter()
        .flat_map_iter(|m| seasonal_series(m, cfg.window).into_iter().filter(wanted))
        .collect();

    if metrics.iter().any(|m| m.is_heat_index()) {
        let mut by_station: BTreeMap<&str, [Option<&DailySeries>; 2]> = BTreeMap::new();
        for s in daily {
            let slot = by_station.entry(&s.station).or_default();
            slot[(s.element == DailyElement::Tmin) as usize] = Some(s);
        }
        let heat: Vec<AnnualSeries> = by_station
            .into_iter()
            .collect::<Vec<_>>()
            .into_par_iter()
            .flat_map_iter(|(id, [hi, lo])| {
                heat_indices(id, hi, lo, cfg.window, cfg.cdd_base_c)
                    .into_iter()
                    .filter(wanted)
            })
            .collect();
        out.extend(heat);
    }
    out.sort_by(|a, b| (&a.key, a.metric).cmp(&(&b.key, b.metric)));
    out
}

// ----------------------------------------------------------------- analysis

/// Results of the whole test battery.
#[derive(Debug, Clone, Default)]
pub struct Analysis {
    pub regional: Vec<AnnualSeries>,
    pub trends: TrendOutput,
    pub medians: Vec<MedianComparison>,
    pub correlations: Vec<CorrelationCell>,
}

pub fn analyze(
    pairs: &[RegionPair],
    station_series: &[AnnualSeries],
    covariates: Option<&BTreeMap<String, ExplanatoryVars>>,
    cfg: &RunConfig,
) -> Analysis {
    let metrics = cfg.metric_list();
    let regional = regional_series(pairs, station_series, &metrics);
    let trends = run_trend_comparison(pairs, station_series, &regional, &metrics, cfg.alpha);
    let medians = run_median_comparison(pairs, &regional, &metrics, cfg.alpha);
    let correlations = covariates
        .map(|c| run_rank_correlation(pairs, &regional, c, &metrics))
        .unwrap_or_default();
    Analysis {
        regional,
        trends,
        medians,
        correlations,
    }
}

/// Ingested data straight through QC, imputation, indices and analysis,
/// without touching the disk.
pub fn run_in_memory(ing: &Ingested, cfg: &RunConfig) -> Result<Analysis> {
    let q = qc(ing.daily.clone(), ing.monthly.clone(), cfg)?;
    let c = impute(&q.daily, &q.monthly, &ing.stations, cfg)?;
    let st = station_indices(&c.daily, &c.monthly, cfg);
    Ok(analyze(&ing.pairs, &st, ing.covariates.as_ref(), cfg))
}

/// A synthetic world from the config's `synth` block, analysed in memory.
pub fn run_synthetic(cfg: &RunConfig) -> Result<Analysis> {
    let spec = cfg.synth.as_ref().ok_or_else(no_synth)?;
    let world = synth_generate(cfg.seed, spec);
    run_in_memory(&Ingested::from_world(&world)?, cfg)
}

fn no_synth() -> Error {
    ConfigError::Invalid("this run needs a `synth` block".into()).into()
}

// -------------------------------------------------------------- file stages

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(store::create(path)?);
    for r in rows {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    csv::Reader::from_reader(store::open(path)?)
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::csv(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::data(path, e.to_string()))
}

/// The inputs a run reads: configured paths, or the synth stage's output.
pub fn resolve_inputs(cfg: &RunConfig, out: &Path) -> Result<Inputs> {
    if let Some(i) = &cfg.inputs {
        return Ok(i.clone());
    }
    if cfg.synth.is_none() {
        return Err(ConfigError::Invalid("either `inputs` or `synth` is required".into()).into());
    }
    let dir = Stage::Synth.dir(out);
    let f = |n: &str| dir.join(n);
    Ok(Inputs {
        ghcnd: f("ghcnd.dly"),
        ghcnm: f("ghcnm.dat"),
        stations: f("stations.txt"),
        regions: f("regions.geojson"),
        covariates: Some(f("covariates.csv")),
    })
}

fn stage_synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    let spec = cfg.synth.as_ref().ok_or_else(no_synth)?;
    let world = synth_generate(cfg.seed, spec);
    world.write(&Stage::Synth.dir(out))?;
    info!(
        "synth: {} stations, {} daily and {} monthly series",
        world.stations.len(),
        world.daily.len(),
        world.monthly.len()
    );
    Ok(())
}

fn stage_ingest(cfg: &RunConfig, out: &Path) -> Result<()> {
    let inputs = resolve_inputs(cfg, out)?;
    let ing = ingest(&inputs, out)?;
    let dir = Stage::Ingest.dir(out);
    let rows: Vec<_> = ing
        .stations
        .iter()
        .map(|s| {
            let a = assign_station_region(s, &ing.regions);
            (s.clone(), a.cr, a.uc)
        })
        .collect();
    store::write_stations(&dir.join("stations.csv"), &rows)?;
    write_json(&dir.join("pairs.json"), &ing.pairs)?;
    write_rows(&dir.join("parse_errors.csv"), &ing.parse_errors)?;
    store::write_daily(&dir.join("daily.csv"), &ing.daily)?;
    store::write_monthly(&dir.join("monthly.csv"), &ing.monthly)?;
    let cov = dir.join("covariates.csv");
    match &ing.covariates {
        Some(c) => store::write_covariates(&cov, c.values())?,
        None if cov.exists() => std::fs::remove_file(&cov).map_err(|e| Error::io(&cov, e))?,
        None => {}
    }
    info!(
        "ingest: {} stations, {} pairs, {} rejected lines",
        ing.stations.len(),
        ing.pairs.len(),
        ing.parse_errors.len()
    );
    Ok(())
}

fn stage_qc(cfg: &RunConfig, out: &Path) -> Result<()> {
    let src = Stage::Ingest.dir(out);
    let q = qc(
        store::read_daily(&src.join("daily.csv"))?,
        store::read_monthly(&src.join("monthly.csv"))?,
        cfg,
    )?;
    let dir = Stage::Qc.dir(out);
    for e in [DailyElement::Tmax, DailyElement::Tmin] {
        let r: Vec<&QcReport> = q.daily_reports.iter().filter(|r| r.element == e.code()).collect();
        store::write_qc_reports(&dir.join(format!("qc_daily_{}.csv", e.code())), &r)?;
    }
    for e in MonthlyElement::ALL {
        let r: Vec<&QcReport> = q.monthly_reports.iter().filter(|r| r.element == e.code()).collect();
        store::write_qc_reports(&dir.join(format!("qc_monthly_{}.csv", e.code())), &r)?;
    }
    store::write_daily(&dir.join("daily.csv"), &q.daily)?;
    store::write_monthly(&dir.join("monthly.csv"), &q.monthly)?;
    info!(
        "qc: kept {}/{} daily and {}/{} monthly series",
        q.daily.len(),
        q.daily_reports.len(),
        q.monthly.len(),
        q.monthly_reports.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct NoteRow<'a> {
    element: &'static str,
    month: &'a str,
    trained: usize,
    imputed: usize,
    unimputable: usize,
    kriging: &'static str,
    fallback: Option<usize>,
}

fn stage_impute(cfg: &RunConfig, out: &Path) -> Result<()> {
    let src = Stage::Qc.dir(out);
    let stations = store::read_stations(&Stage::Ingest.dir(out).join("stations.csv"))?;
    let c = impute(
        &store::read_daily(&src.join("daily.csv"))?,
        &store::read_monthly(&src.join("monthly.csv"))?,
        &stations,
        cfg,
    )?;
    let dir = Stage::Impute.dir(out);
    store::write_daily(&dir.join("daily.csv"), &c.daily)?;
    store::write_daily_masks(&dir.join("daily_mask.csv"), &c.daily, &c.daily_masks)?;
    store::write_monthly(&dir.join("monthly.csv"), &c.monthly)?;
    store::write_monthly_masks(&dir.join("monthly_mask.csv"), &c.monthly, &c.monthly_masks)?;
    let notes: Vec<NoteRow> = c
        .notes
        .iter()
        .map(|(e, n)| {
            let (kriging, fallback) = match n.kriging {
                KrigingOutcome::NotNeeded => ("not_needed", None),
                KrigingOutcome::Untrained => ("untrained", None),
                KrigingOutcome::SkippedDegenerate => ("skipped_degenerate", None),
                KrigingOutcome::SkippedInsufficientPairs => ("skipped_insufficient_pairs", None),
                KrigingOutcome::Kriged { fallback } => ("kriged", Some(fallback)),
            };
            NoteRow {
                element: e.code(),
                month: &n.month,
                trained: n.trained,
                imputed: n.imputed,
                unimputable: n.unimputable,
                kriging,
                fallback,
            }
        })
        .collect();
    write_rows(&dir.join("notes.csv"), &notes)?;
    let unfilled: usize = c
        .monthly_masks
        .iter()
        .chain(&c.daily_masks)
        .map(|m| m.iter().filter(|&&s| s == SlotStatus::Unimputable).count())
        .sum();
    info!("impute: {unfilled} slots left unfilled");
    Ok(())
}

fn write_annual(path: &Path, series: &[AnnualSeries]) -> Result<()> {
    let w = store::create(path)?;
    write_annual_csv(series, w).map_err(|e| Error::io(path, e))
}

fn read_annual(path: &Path) -> Result<Vec<AnnualSeries>> {
    read_annual_csv(store::open(path)?, path)
}

fn read_pairs(out: &Path) -> Result<Vec<RegionPair>> {
    read_json(&Stage::Ingest.dir(out).join("pairs.json"))
}

fn stage_indices(cfg: &RunConfig, out: &Path) -> Result<()> {
    let src = Stage::Impute.dir(out);
    let st = station_indices(
        &store::read_daily(&src.join("daily.csv"))?,
        &store::read_monthly(&src.join("monthly.csv"))?,
        cfg,
    );
    let pairs = read_pairs(out)?;
    let regional = regional_series(&pairs, &st, &cfg.metric_list());
    let dir = Stage::Indices.dir(out);
    write_annual(&dir.join("station_annual.csv"), &st)?;
    write_annual(&dir.join("regional_annual.csv"), &regional)?;
    info!("indices: {} station series", st.len());
    Ok(())
}

fn stage_trends(cfg: &RunConfig, out: &Path) -> Result<()> {
    let src = Stage::Indices.dir(out);
    let st = read_annual(&src.join("station_annual.csv"))?;
    let regional = read_annual(&src.join("regional_annual.csv"))?;
    let t = run_trend_comparison(&read_pairs(out)?, &st, &regional, &cfg.metric_list(), cfg.alpha);
    let dir = Stage::Trends.dir(out);
    write_rows(&dir.join("station_trends.csv"), &t.stations)?;
    write_rows(&dir.join("regional_trends.csv"), &t.regional)?;
    write_rows(&dir.join("proportions.csv"), &t.comparisons)?;
    Ok(())
}

fn stage_compare(cfg: &RunConfig, out: &Path) -> Result<()> {
    let regional = read_annual(&Stage::Indices.dir(out).join("regional_annual.csv"))?;
    let m = run_median_comparison(&read_pairs(out)?, &regional, &cfg.metric_list(), cfg.alpha);
    write_rows(&Stage::Compare.dir(out).join("medians.csv"), &m)
}

fn stage_correlate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let dir = Stage::Correlate.dir(out);
    let cov_path = Stage::Ingest.dir(out).join("covariates.csv");
    if !cov_path.exists() {
        warn!("correlate: no covariates were ingested; skipping");
        for m in ["fig4a.csv", "fig4b.csv"] {
            let p = dir.join(m);
            if p.exists() {
                std::fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
            }
        }
        return Ok(());
    }
    let pairs = read_pairs(out)?;
    let covs = load_explanatory_vars(store::open(&cov_path)?, &pairs)?;
    let regional = read_annual(&Stage::Indices.dir(out).join("regional_annual.csv"))?;
    let cells = run_rank_correlation(&pairs, &regional, &covs, &cfg.metric_list());
    for (m, name) in [(Matrix::UcAbsolute, "fig4a.csv"), (Matrix::UcMinusNonUc, "fig4b.csv")] {
        let rows: Vec<&CorrelationCell> = cells.iter().filter(|c| c.matrix == m).collect();
        write_rows(&dir.join(name), &rows)?;
    }
    Ok(())
}

fn read_optional<T: DeserializeOwned>(path: &Path) -> Result<Option<Vec<T>>> {
    if path.exists() {
        read_rows(path).map(Some)
    } else {
        Ok(None)
    }
}

fn stage_report(cfg: &RunConfig, out: &Path) -> Result<()> {
    let medians: Option<Vec<MedianComparison>> =
        read_optional(&Stage::Compare.dir(out).join("medians.csv"))?;
    let trends: Option<Vec<TrendComparison>> =
        read_optional(&Stage::Trends.dir(out).join("proportions.csv"))?;
    let mut correlations: Option<Vec<CorrelationCell>> = None;
    for name in ["fig4a.csv", "fig4b.csv"] {
        if let Some(rows) = read_optional(&Stage::Correlate.dir(out).join(name))? {
            correlations.get_or_insert_with(Vec::new).extend(rows);
        }
    }
    let inputs = resolve_inputs(cfg, out)?;
    report::emit(
        &Stage::Report.dir(out),
        out,
        cfg,
        &inputs,
        medians.as_deref(),
        trends.as_deref(),
        correlations.as_deref(),
    )
}

/// Runs one file-backed stage.
pub fn run_stage(stage: Stage, cfg: &RunConfig, out: &Path) -> Result<()> {
    let t0 = Instant::now();
    match stage {
        Stage::Synth => stage_synth(cfg, out),
        Stage::Ingest => stage_ingest(cfg, out),
        Stage::Qc => stage_qc(cfg, out),
        Stage::Impute => stage_impute(cfg, out),
        Stage::Indices => stage_indices(cfg, out),
        Stage::Trends => stage_trends(cfg, out),
        Stage::Compare => stage_compare(cfg, out),
        Stage::Correlate => stage_correlate(cfg, out),
        Stage::Report => stage_report(cfg, out),
    }?;
    log_timing(out, stage, t0.elapsed().as_secs_f64())
}

/// Every stage in order. The synth stage runs only when no inputs are
/// configured.
pub fn run_all(cfg: &RunConfig, out: &Path) -> Result<()> {
    for stage in Stage::ALL {
        if stage == Stage::Synth && cfg.inputs.is_some() {
            continue;
        }
        run_stage(stage, cfg, out)?;
    }
    Ok(())
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct RunLog {
    /// Seconds of the latest run of each stage.
    stages: BTreeMap<String, f64>,
}

fn log_timing(out: &Path, stage: Stage, secs: f64) -> Result<()> {
    let path = out.join("run_log.json");
    let mut log: RunLog = if path.exists() {
        read_json(&path).unwrap_or_default()
    } else {
        RunLog::default()
    };
    log.stages.insert(stage.name().to_owned(), secs);
    info!("{stage} finished in {secs:.2}s");
    write_json(&path, &log)
}
