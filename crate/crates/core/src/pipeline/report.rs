//! The report bundle: plot-ready tables, one per figure analogue, and a
//! manifest of inputs and outputs with their SHA-256 digests.
//!
//! | file    | rows                                          |
//! |---------|-----------------------------------------------|
//! | fig2a   | seasonal temperatures, median comparison      |
//! | fig2c   | seasonal temperatures, trend proportions      |
//! | fig3a   | heat indices, median comparison               |
//! | fig3b   | heat indices, trend proportions               |
//! | fig4a/b | rank correlations, UC and UC minus non-UC     |
//!
//! Everything in the bundle is a pure function of inputs, config and seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::analysis::{CorrelationCell, Direction, Matrix, MedianComparison, TrendComparison};
use super::config::{hex, Inputs, RunConfig};
use super::stages::display_path;
use super::store;
use crate::{Error, Result, Season};

/// One row of a figure table. Median fields come from the rank-sum
/// comparison, proportion fields from the trend comparison; `direction`
/// belongs to the figure's own test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    pub pair: String,
    pub metric: String,
    pub season: Season,
    pub median_diff: Option<f64>,
    pub wilcoxon_p: Option<f64>,
    pub prop_uc: Option<f64>,
    pub prop_nonuc: Option<f64>,
    pub prop_p: Option<f64>,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: Vec<FileDigest>,
    pub files: Vec<FileDigest>,
}

pub const MANIFEST: &str = "manifest.json";

fn digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

type CellKey = (String, String, Season);

/// Joins median and trend results on (pair, metric, season), keeping the
/// order in which cells first appear.
pub fn figure_rows(
    medians: &[MedianComparison],
    trends: &[TrendComparison],
    heat: bool,
    by_trend: bool,
) -> Vec<FigureRow> {
    let key = |p: &str, m: &str, s: Season| -> CellKey { (p.to_owned(), m.to_owned(), s) };
    let mut order: Vec<CellKey> = Vec::new();
    let mut med: BTreeMap<CellKey, &MedianComparison> = BTreeMap::new();
    let mut tr: BTreeMap<CellKey, &TrendComparison> = BTreeMap::new();
    for m in medians {
        let k = key(&m.pair, &m.metric, m.season);
        if med.insert(k.clone(), m).is_none() && !tr.contains_key(&k) {
            order.push(k);
        }
    }
    for t in trends {
        let k = key(&t.pair, &t.metric, t.season);
        if tr.insert(k.clone(), t).is_none() && !med.contains_key(&k) {
            order.push(k);
        }
    }
    order
        .into_iter()
        .filter(|k| (k.2 == Season::Ann) == heat)
        .map(|k| {
            let m = med.get(&k);
            let t = tr.get(&k);
            let direction = if by_trend {
                t.map(|t| t.direction)
            } else {
                m.map(|m| m.direction)
            };
            FigureRow {
                median_diff: m.and_then(|m| m.median_diff),
                wilcoxon_p: m.and_then(|m| m.wilcoxon_p),
                prop_uc: t.and_then(|t| t.prop_uc),
                prop_nonuc: t.and_then(|t| t.prop_nonuc),
                prop_p: t.and_then(|t| t.prop_p),
                direction: direction.unwrap_or(Direction::InsufficientData),
                pair: k.0,
                metric: k.1,
                season: k.2,
            }
        })
        .collect()
}

fn write_table<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(store::create(path)?);
    for r in rows {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn input_files(inputs: &Inputs) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in [&inputs.ghcnd, &inputs.ghcnm, &inputs.stations, &inputs.regions]
        .into_iter()
        .chain(inputs.covariates.as_ref())
    {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file())
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Writes whichever tables have results, then the manifest. Stale tables
/// from earlier runs are removed so the bundle reflects this run only.
pub fn emit(
    dir: &Path,
    out: &Path,
    cfg: &RunConfig,
    inputs: &Inputs,
    medians: Option<&[MedianComparison]>,
    trends: Option<&[TrendComparison]>,
    correlations: Option<&[CorrelationCell]>,
) -> Result<()> {
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut written: Vec<String> = Vec::new();
    if medians.is_some() || trends.is_some() {
        let (m, t) = (medians.unwrap_or_default(), trends.unwrap_or_default());
        for (name, heat, by_trend, present) in [
            ("fig2a.csv", false, false, medians.is_some()),
            ("fig2c.csv", false, true, trends.is_some()),
            ("fig3a.csv", true, false, medians.is_some()),
            ("fig3b.csv", true, true, trends.is_some()),
        ] {
            let rows = figure_rows(m, t, heat, by_trend);
            if present && !rows.is_empty() {
                write_table(&dir.join(name), &rows)?;
                written.push(name.to_owned());
            }
        }
    }
    if let Some(cells) = correlations {
        for (matrix, name) in [(Matrix::UcAbsolute, "fig4a.csv"), (Matrix::UcMinusNonUc, "fig4b.csv")] {
            let rows: Vec<&CorrelationCell> = cells.iter().filter(|c| c.matrix == matrix).collect();
            if !rows.is_empty() {
                write_table(&dir.join(name), &rows)?;
                written.push(name.to_owned());
            }
        }
    }

    let mut inputs_digest = Vec::new();
    for f in input_files(inputs)? {
        inputs_digest.push(FileDigest {
            path: display_path(&f, out),
            sha256: digest(&f)?,
        });
    }
    let mut files = Vec::new();
    for name in written {
        files.push(FileDigest {
            sha256: digest(&dir.join(&name))?,
            path: name,
        });
    }
    let manifest = Manifest {
        name: env!("CARGO_PKG_NAME").to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        inputs: inputs_digest,
        files,
    };
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}
