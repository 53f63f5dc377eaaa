use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ConfigError, SynthSpec};
use crate::indices::{Metric, Season, CDD_BASE_C};
use crate::qc::{ImputeConfig, QcThresholds, StudyWindow};
use crate::MonthlyElement;

/// Input files. Relative paths are resolved against the directory holding
/// the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    /// GHCN-Daily file, or a directory of `*.dly` files.
    pub ghcnd: PathBuf,
    /// GHCN-Monthly file, or a directory of `*.dat` files.
    pub ghcnm: PathBuf,
    /// Station inventory.
    pub stations: PathBuf,
    /// Region feature collection.
    pub regions: PathBuf,
    #[serde(default)]
    pub covariates: Option<PathBuf>,
}

impl Inputs {
    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.ghcnd,
            &mut self.ghcnm,
            &mut self.stations,
            &mut self.regions,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = self.covariates.as_mut().filter(|p| p.is_relative()) {
            *p = base.join(&*p);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Variable {
    Tmin,
    Tavg,
    Tmax,
    Cdd,
    Cnm,
    P95,
}

/// One analysis run. Every field has a default; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Absent when the run is driven by `synth`.
    pub inputs: Option<Inputs>,
    pub window: StudyWindow,
    pub seasons: Vec<Season>,
    pub metrics: Vec<Variable>,
    pub alpha: f64,
    pub qc: QcThresholds,
    pub impute: ImputeConfig,
    pub cdd_base_c: f64,
    pub seed: u64,
    pub synth: Option<SynthSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: None,
            window: StudyWindow::default(),
            seasons: vec![Season::Djf, Season::Jja],
            metrics: vec![
                Variable::Tmin,
                Variable::Tavg,
                Variable::Tmax,
                Variable::Cdd,
                Variable::Cnm,
                Variable::P95,
            ],
            alpha: 0.05,
            qc: QcThresholds::default(),
            impute: ImputeConfig::default(),
            cdd_base_c: CDD_BASE_C,
            seed: 0,
            synth: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(ConfigError::Parse)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file, resolving input paths against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_owned(),
            source: e,
        })?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(inputs) = cfg.inputs.as_mut() {
            inputs.resolve(base);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.window.start_year >= self.window.end_year {
            return invalid(format!("window {} must span more than one year", self.window));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return invalid(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.seasons.is_empty() || self.seasons.contains(&Season::Ann) {
            return invalid("seasons must be a non-empty subset of DJF, JJA".into());
        }
        if self.metrics.is_empty() {
            return invalid("metrics must not be empty".into());
        }
        if !self.cdd_base_c.is_finite() {
            return invalid("cdd_base_c must be finite".into());
        }
        let q = &self.qc;
        for (name, v) in [
            ("qc.monthly_max_missing_frac", q.monthly_max_missing_frac),
            ("qc.daily_max_summer_missing_frac", q.daily_max_summer_missing_frac),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return invalid(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        self.impute
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(s) = &self.synth {
            s.validate()?;
        }
        if self.inputs.is_none() && self.synth.is_none() {
            return invalid("either `inputs` or `synth` is required".into());
        }
        Ok(())
    }

    /// Metrics in report order: seasonal temperatures, then heat indices.
    pub fn metric_list(&self) -> Vec<Metric> {
        let mut out = Vec::new();
        for (v, e) in [
            (Variable::Tmin, MonthlyElement::Tmin),
            (Variable::Tavg, MonthlyElement::Tavg),
            (Variable::Tmax, MonthlyElement::Tmax),
        ] {
            if self.metrics.contains(&v) {
                for s in [Season::Djf, Season::Jja] {
                    if self.seasons.contains(&s) {
                        out.push(Metric::Temp(e, s));
                    }
                }
            }
        }
        for (v, m) in [
            (Variable::Cdd, Metric::Cdd),
            (Variable::Cnm, Metric::Cnm),
            (Variable::P95, Metric::P95),
        ] {
            if self.metrics.contains(&v) {
                out.push(m);
            }
        }
        out
    }

    /// SHA-256 of the canonical JSON form of the configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
