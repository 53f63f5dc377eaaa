//! Explanatory variables per UC/non-UC pair, read from a CSV with header
//! `uc_id,cr_id,pop_uc,pop_diff,pop_pct_change_uc,pop_diff_pct_change,pct_urban,pct_cropland,mean_elev,elev_range`.
//!
//! Empty cells are allowed and read as missing. Land-use and elevation
//! columns describe the climate region, so every row sharing a `cr_id`
//! must agree on them.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{GeoError, RegionPair};

pub const COVARIATE_HEADER: [&str; 10] = [
    "uc_id",
    "cr_id",
    "pop_uc",
    "pop_diff",
    "pop_pct_change_uc",
    "pop_diff_pct_change",
    "pct_urban",
    "pct_cropland",
    "mean_elev",
    "elev_range",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Covariate {
    PopUc,
    PopDiff,
    PopPctChangeUc,
    PopDiffPctChange,
    PctUrban,
    PctCropland,
    MeanElev,
    ElevRange,
}

impl Covariate {
    pub const ALL: [Covariate; 8] = [
        Covariate::PopUc,
        Covariate::PopDiff,
        Covariate::PopPctChangeUc,
        Covariate::PopDiffPctChange,
        Covariate::PctUrban,
        Covariate::PctCropland,
        Covariate::MeanElev,
        Covariate::ElevRange,
    ];

    pub fn column(self) -> &'static str {
        COVARIATE_HEADER[self as usize + 2]
    }
}

impl fmt::Display for Covariate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanatoryVars {
    pub uc_id: String,
    pub cr_id: String,
    /// persons
    pub pop_uc: Option<f64>,
    /// persons, UC minus non-UC
    pub pop_diff: Option<f64>,
    /// %/yr
    pub pop_pct_change_uc: Option<f64>,
    /// %/yr
    pub pop_diff_pct_change: Option<f64>,
    pub pct_urban: Option<f64>,
    pub pct_cropland: Option<f64>,
    /// m
    pub mean_elev: Option<f64>,
    /// m
    pub elev_range: Option<f64>,
}

impl ExplanatoryVars {
    pub fn get(&self, c: Covariate) -> Option<f64> {
        match c {
            Covariate::PopUc => self.pop_uc,
            Covariate::PopDiff => self.pop_diff,
            Covariate::PopPctChangeUc => self.pop_pct_change_uc,
            Covariate::PopDiffPctChange => self.pop_diff_pct_change,
            Covariate::PctUrban => self.pct_urban,
            Covariate::PctCropland => self.pct_cropland,
            Covariate::MeanElev => self.mean_elev,
            Covariate::ElevRange => self.elev_range,
        }
    }

    fn region_level(&self) -> [Option<f64>; 4] {
        [self.pct_urban, self.pct_cropland, self.mean_elev, self.elev_range]
    }
}

fn parse_cell(row: usize, column: &str, raw: &str) -> Result<Option<f64>, GeoError> {
    let cleaned: String = raw.trim().chars().filter(|&c| c != ',' && c != '%').collect();
    if cleaned.is_empty() {
        return Ok(None);
    }
    cleaned
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(Some)
        .ok_or_else(|| GeoError::Covariates(format!("row {row}: bad {column} value `{raw}`")))
}

/// Reads covariates and returns one entry per pair, keyed by UC id.
pub fn load_explanatory_vars<R: Read>(
    reader: R,
    pairs: &[RegionPair],
) -> Result<BTreeMap<String, ExplanatoryVars>, GeoError> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = csv
        .headers()
        .map_err(|e| GeoError::Covariates(e.to_string()))?
        .clone();
    if header.iter().ne(COVARIATE_HEADER) {
        return Err(GeoError::Covariates(format!(
            "expected header `{}`",
            COVARIATE_HEADER.join(",")
        )));
    }

    let mut rows: BTreeMap<String, ExplanatoryVars> = BTreeMap::new();
    for (i, record) in csv.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| GeoError::Covariates(e.to_string()))?;
        let cell = |c: usize| parse_cell(row, COVARIATE_HEADER[c], &record[c]);
        let vars = ExplanatoryVars {
            uc_id: record[0].to_owned(),
            cr_id: record[1].to_owned(),
            pop_uc: cell(2)?,
            pop_diff: cell(3)?,
            pop_pct_change_uc: cell(4)?,
            pop_diff_pct_change: cell(5)?,
            pct_urban: cell(6)?,
            pct_cropland: cell(7)?,
            mean_elev: cell(8)?,
            elev_range: cell(9)?,
        };
        for (name, v) in [("pct_urban", vars.pct_urban), ("pct_cropland", vars.pct_cropland)] {
            if let Some(v) = v.filter(|v| !(0.0..=100.0).contains(v)) {
                return Err(GeoError::Covariates(format!(
                    "row {row}: {name} = {v} is outside [0, 100]"
                )));
            }
        }
        if let Some(v) = vars.elev_range.filter(|&v| v < 0.0) {
            return Err(GeoError::Covariates(format!(
                "row {row}: elev_range = {v} is negative"
            )));
        }
        if rows.contains_key(&vars.uc_id) {
            return Err(GeoError::Covariates(format!(
                "row {row}: duplicate UC `{}`",
                vars.uc_id
            )));
        }
        if let Some(other) = rows
            .values()
            .find(|o| o.cr_id == vars.cr_id && o.region_level() != vars.region_level())
        {
            return Err(GeoError::Covariates(format!(
                "row {row}: climate-region values for `{}` disagree with UC `{}`",
                vars.cr_id, other.uc_id
            )));
        }
        rows.insert(vars.uc_id.clone(), vars);
    }

    let mut out = BTreeMap::new();
    for pair in pairs {
        let vars = rows
            .remove(&pair.uc_id)
            .ok_or_else(|| GeoError::MissingCovariateRow(pair.uc_id.clone()))?;
        if vars.cr_id != pair.cr_id {
            return Err(GeoError::Covariates(format!(
                "UC `{}` is hosted by `{}` but its row names `{}`",
                pair.uc_id, pair.cr_id, vars.cr_id
            )));
        }
        out.insert(pair.uc_id.clone(), vars);
    }
    Ok(out)
}
