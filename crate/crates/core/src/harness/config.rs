//! Experiment configuration.
//!
//! Configs are TOML files restricted to flat `key = value` pairs, lists and
//! one level of `[section]` tables. Every key is optional except
//! `securities`; unknown keys are rejected so typos surface early.
//!
//! ```toml
//! name = "indices"
//! securities = ["data/DJI.csv", "SPY", "synthetic:SYN:7"]
//! data_dir = "data"              # where bare tickers are looked up
//! start = "2008-01-01"
//! end = "2018-01-01"
//! feature_mode = "both"          # trend | continuous | both
//! families = ["LOG", "RF"]
//! grid = "full"                  # default | full
//! specs = []                     # optional subset of spec labels
//! seed = 42
//! parallelism = 0                # 0 = all available cores
//! trading = true
//!
//! [walkforward]
//! initial_training_days = 250
//! refit_every = 1
//!
//! [trader]
//! principal = 100000.0
//! cost_per_trade = 4.95
//! rf_annual = 0.02
//! allow_fractional_shares = false
//!
//! [econometrics]
//! enabled = true
//! k_set = [2, 5, 10, 30]
//! universe = "universe.txt"      # optional; sampled with the global seed
//! sample_size = 100
//! ```
//!
//! A security entry is a CSV path (anything containing `/` or ending in
//! `.csv`), a bare ticker resolved as `<data_dir>/<ticker>.csv`, or
//! `synthetic:<name>[:<seed>]` for a simulated geometric random walk of
//! `synthetic_days` bars.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifiers::{enumerate_grid, Family, ModelSpec};
use crate::data::{DateRange, QualityConfig};
use crate::econometrics::{AdfConfig, BatchConfig, Deterministic, LagRounding, DEFAULT_K_SET};
use crate::indicators::FeatureMode;
use crate::trading::TraderConfig;
use crate::walkforward::MIN_INITIAL_TRAINING_DAYS;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSelection {
    #[default]
    Trend,
    Continuous,
    Both,
}

impl ModeSelection {
    pub fn modes(self) -> Vec<FeatureMode> {
        match self {
            ModeSelection::Trend => vec![FeatureMode::Trend],
            ModeSelection::Continuous => vec![FeatureMode::Continuous],
            ModeSelection::Both => vec![FeatureMode::Trend, FeatureMode::Continuous],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridSelection {
    /// One representative spec per family.
    #[default]
    Default,
    /// Every grid point.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkForwardSection {
    pub initial_training_days: usize,
    pub refit_every: usize,
}

impl Default for WalkForwardSection {
    fn default() -> Self {
        WalkForwardSection {
            initial_training_days: 250,
            refit_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EconometricsSection {
    pub enabled: bool,
    pub k_set: Vec<usize>,
    pub deterministic: Deterministic,
    pub lag_rounding: LagRounding,
    pub lag_multiplier: f64,
    pub max_lag: Option<usize>,
    /// File listing one security entry per line (`#` starts a comment).
    pub universe: Option<PathBuf>,
    /// Seeded sample size drawn from the universe; all entries when unset.
    pub sample_size: Option<usize>,
}

impl Default for EconometricsSection {
    fn default() -> Self {
        let adf = AdfConfig::default();
        EconometricsSection {
            enabled: true,
            k_set: DEFAULT_K_SET.to_vec(),
            deterministic: adf.deterministic,
            lag_rounding: adf.rounding,
            lag_multiplier: adf.lag_multiplier,
            max_lag: adf.max_lag,
            universe: None,
            sample_size: None,
        }
    }
}

impl EconometricsSection {
    pub fn batch_config(&self) -> BatchConfig {
        BatchConfig {
            adf: AdfConfig {
                deterministic: self.deterministic,
                max_lag: self.max_lag,
                rounding: self.lag_rounding,
                lag_multiplier: self.lag_multiplier,
            },
            k_set: self.k_set.clone(),
            ..BatchConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub accuracy_bin_width: f64,
    pub alpha_bin_width: f64,
    pub t_stat_bin_width: f64,
    pub p_value_bin_width: f64,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection {
            accuracy_bin_width: 0.01,
            alpha_bin_width: 0.05,
            t_stat_bin_width: 1.0,
            p_value_bin_width: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub securities: Vec<String>,
    pub data_dir: Option<PathBuf>,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    pub feature_mode: ModeSelection,
    pub families: Vec<Family>,
    pub grid: GridSelection,
    /// Optional whitelist of spec labels such as `"RF(trees=20)"`.
    pub specs: Vec<String>,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub parallelism: usize,
    pub trading: bool,
    pub synthetic_days: usize,
    pub walkforward: WalkForwardSection,
    pub trader: TraderConfig,
    pub econometrics: EconometricsSection,
    pub quality: QualityConfig,
    pub report: ReportSection,
    /// Directory relative paths resolve against; the config file's folder
    /// when loaded from disk.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            securities: Vec::new(),
            data_dir: None,
            start: None,
            end: None,
            feature_mode: ModeSelection::default(),
            families: Family::ALL.to_vec(),
            grid: GridSelection::default(),
            specs: Vec::new(),
            output_dir: PathBuf::from("runs"),
            seed: 0,
            parallelism: 0,
            trading: true,
            synthetic_days: 2520,
            walkforward: WalkForwardSection::default(),
            trader: TraderConfig::default(),
            econometrics: EconometricsSection::default(),
            quality: QualityConfig::default(),
            report: ReportSection::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml_str(&text)?;
        config.base_dir = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.securities.is_empty() && self.econometrics.universe.is_none() {
            return Err(Error::Config("no securities listed".into()));
        }
        if self.families.is_empty() {
            return Err(Error::Config("no model families selected".into()));
        }
        if let (Some(s), Some(e)) = (self.start, self.end) {
            if s > e {
                return Err(Error::Config(format!("start {s} is after end {e}")));
            }
        }
        if self.walkforward.initial_training_days < MIN_INITIAL_TRAINING_DAYS {
            return Err(Error::Config(format!(
                "initial_training_days must be at least {MIN_INITIAL_TRAINING_DAYS}"
            )));
        }
        if self.walkforward.refit_every == 0 {
            return Err(Error::Config("refit_every must be at least 1".into()));
        }
        if self.econometrics.k_set.iter().any(|&k| k < 2) {
            return Err(Error::Config("every k in k_set must be at least 2".into()));
        }
        if !(self.econometrics.lag_multiplier > 0.0) {
            return Err(Error::Config("lag_multiplier must be positive".into()));
        }
        let r = &self.report;
        if [
            r.accuracy_bin_width,
            r.alpha_bin_width,
            r.t_stat_bin_width,
            r.p_value_bin_width,
        ]
        .iter()
        .any(|w| !(*w > 0.0))
        {
            return Err(Error::Config("histogram bin widths must be positive".into()));
        }
        self.trader.validate()?;
        let specs = self.model_specs();
        if specs.is_empty() {
            return Err(Error::Config("the spec filter matches no grid point".into()));
        }
        for label in &self.specs {
            if !specs.iter().any(|s| &s.label() == label) {
                return Err(Error::Config(format!(
                    "spec `{label}` is not in the selected families' grid"
                )));
            }
        }
        Ok(())
    }

    pub fn date_range(&self) -> DateRange {
        DateRange {
            start: self.start,
            end: self.end,
        }
    }

    /// Specs to run, in family then grid order, seeded with the global seed.
    pub fn model_specs(&self) -> Vec<ModelSpec> {
        let mut out = Vec::new();
        for &family in &self.families {
            let grid = match self.grid {
                GridSelection::Default => vec![ModelSpec::default_for(family)],
                GridSelection::Full => enumerate_grid(family),
            };
            let filter_all = self.grid == GridSelection::Full && !self.specs.is_empty();
            for spec in grid {
                let keep = if filter_all {
                    self.specs.contains(&spec.label())
                } else {
                    true
                };
                if keep {
                    out.push(spec.with_seed(self.seed));
                }
            }
        }
        if self.grid == GridSelection::Default && !self.specs.is_empty() {
            // Explicit labels extend the default points within the selected families.
            for &family in &self.families {
                for spec in enumerate_grid(family) {
                    let spec = spec.with_seed(self.seed);
                    if self.specs.contains(&spec.label()) && !out.contains(&spec) {
                        out.push(spec);
                    }
                }
            }
        }
        out
    }

    /// SHA-256 over the canonical JSON form. The output location and thread
    /// count do not affect results and are left out.
    pub fn fingerprint(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        canonical.parallelism = 0;
        let json = serde_json::to_string(&canonical).expect("config serializes to JSON");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `<output_dir>/run-<seed>-<fingerprint prefix>`; stable across reruns.
    pub fn run_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
            .join(format!("run-{}-{}", self.seed, &self.fingerprint()[..12]))
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}
