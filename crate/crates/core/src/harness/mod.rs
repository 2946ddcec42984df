//! Experiment orchestration.
//!
//! An experiment is driven by an [`ExperimentConfig`] and runs up to three
//! stages:
//!
//! - `ingest` loads every security, checks data quality and writes the price
//!   and feature tables.
//! - `econ` runs the ADF and variance-ratio batch over the configured
//!   securities or a seeded sample of a universe file.
//! - `backtest` runs one walk-forward and trading simulation per
//!   (security, feature mode, model spec) unit.
//!
//! Units run on a dedicated thread pool. A unit that errors or panics is
//! recorded as a failure with its reason and never aborts its siblings.
//! Results are collected in launch order and written by the calling thread,
//! so every artifact except `timing.json` is byte-identical across reruns.
//!
//! Run directory layout:
//!
//! ```text
//! run-<seed>-<fingerprint>/
//!   config.toml            effective configuration
//!   master.json            MasterLog: config, per-stage records, aggregates
//!   results.csv            one row per backtest unit
//!   econometrics.csv       per-security test statistics
//!   timing.json            wall-clock seconds per stage and unit
//!   prices/<ticker>.csv
//!   features/<ticker>_<mode>.csv
//!   predictions/<ticker>_<mode>_<spec>.csv
//!   trades/<ticker>_<mode>_<spec>.csv
//!   benchmarks/<ticker>_<mode>.csv
//!   report/                written by emit_report
//! ```

mod config;
mod report;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    EconometricsSection, ExperimentConfig, GridSelection, ModeSelection, ReportSection, WalkForwardSection,
};
pub use report::emit_report;

use crate::classifiers::{Family, ModelSpec};
use crate::data::{load_csv, log_returns, validate_with, CsvFetcher, Fetcher, PriceSeries, ReturnSeries};
use crate::econometrics::{run_batch, BatchTestReport};
use crate::indicators::{build_feature_table, FeatureMode, FeatureTable};
use crate::metrics::{classification_report, portfolio_report, ClassificationReport, ConfusionMatrix, PortfolioReport};
use crate::trading::{benchmark_for, simulate};
use crate::walkforward::{run_walk_forward, summarize, WalkForwardConfig};
use crate::{simulate as sim, Error, Result};

/// First bar of every synthetic security.
pub const SYNTHETIC_START: NaiveDate = match NaiveDate::from_ymd_opt(2008, 1, 2) {
    Some(d) => d,
    None => panic!("valid date"),
};
const SYNTHETIC_DRIFT: f64 = 0.0002;
const SYNTHETIC_VOL: f64 = 0.012;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Econ,
    Backtest,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Ingest, Stage::Econ, Stage::Backtest];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Econ => "econ",
            Stage::Backtest => "backtest",
        }
    }
}

/// Where a security's prices come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SecuritySource {
    Synthetic { name: String, seed: Option<u64> },
    Path(PathBuf),
    Ticker(String),
}

impl SecuritySource {
    pub fn parse(entry: &str) -> Result<Self> {
        let entry = entry.trim();
        if entry.is_empty() {
            return Err(Error::Config("empty security entry".into()));
        }
        if let Some(rest) = entry.strip_prefix("synthetic:") {
            let (name, seed) = match rest.split_once(':') {
                Some((name, seed)) => {
                    let seed = seed
                        .parse()
                        .map_err(|_| Error::Config(format!("bad synthetic seed in `{entry}`")))?;
                    (name, Some(seed))
                }
                None => (rest, None),
            };
            if name.is_empty() {
                return Err(Error::Config(format!("synthetic entry `{entry}` has no name")));
            }
            return Ok(SecuritySource::Synthetic {
                name: name.to_string(),
                seed,
            });
        }
        if entry.contains('/') || entry.contains('\\') || entry.ends_with(".csv") {
            Ok(SecuritySource::Path(PathBuf::from(entry)))
        } else {
            Ok(SecuritySource::Ticker(entry.to_string()))
        }
    }
}

/// Loads a security and applies the configured date range.
pub fn load_security(config: &ExperimentConfig, entry: &str) -> Result<PriceSeries> {
    let range = config.date_range();
    match SecuritySource::parse(entry)? {
        SecuritySource::Synthetic { name, seed } => {
            let seed = seed.unwrap_or_else(|| config.seed ^ name_hash(&name));
            sim::gbm_series(
                &name,
                SYNTHETIC_START,
                config.synthetic_days,
                100.0,
                SYNTHETIC_DRIFT,
                SYNTHETIC_VOL,
                seed,
            )
            .slice(range)
        }
        SecuritySource::Path(path) => load_csv(config.resolve(&path))?.slice(range),
        SecuritySource::Ticker(ticker) => {
            let dir = config.resolve(config.data_dir.as_deref().unwrap_or(Path::new(".")));
            CsvFetcher::new(dir).fetch(&ticker, range)
        }
    }
}

/// FNV-1a, so unseeded synthetic names get distinct but stable paths.
fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestRecord {
    pub entry: String,
    pub ticker: String,
    pub status: RunStatus,
    pub reason: Option<String>,
    pub bars: usize,
    pub first_date: Option<NaiveDate>,
    pub last_date: Option<NaiveDate>,
    pub missing_date_gaps: usize,
    pub outlier_flags: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconometricsLog {
    /// Entries tested, after universe sampling.
    pub sampled: Vec<String>,
    /// Entries that could not be loaded, with reasons.
    pub load_failures: Vec<(String, String)>,
    pub report: Option<BatchTestReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradingSummary {
    pub final_value: f64,
    pub buy_and_hold_final: f64,
    pub risk_free_final: f64,
    pub total_costs: f64,
    pub forced_holds: usize,
    pub portfolio: PortfolioReport,
}

/// Outcome of one (security, mode, spec) backtest unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub ticker: String,
    pub mode: FeatureMode,
    pub family: Family,
    pub spec_label: String,
    pub spec: ModelSpec,
    pub status: RunStatus,
    pub reason: Option<String>,
    pub predictions: usize,
    pub flagged: usize,
    pub confusion: Option<ConfusionMatrix>,
    pub classification: Option<ClassificationReport>,
    pub trading: Option<TradingSummary>,
    pub prediction_file: Option<String>,
    pub ledger_file: Option<String>,
    pub benchmark_file: Option<String>,
}

impl RunRecord {
    pub fn completed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    pub fn accuracy(&self) -> Option<f64> {
        self.classification.map(|c| c.accuracy)
    }

    pub fn alpha(&self) -> Option<f64> {
        self.trading.and_then(|t| t.portfolio.alpha)
    }

    pub fn trade_count(&self) -> Option<usize> {
        self.trading.map(|t| t.portfolio.trade_count)
    }
}

/// Averages of one spec over every security it completed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyAverage {
    pub mode: FeatureMode,
    pub family: Family,
    pub spec_label: String,
    pub completed: usize,
    pub failed: usize,
    pub mean_accuracy: Option<f64>,
    pub mean_alpha: Option<f64>,
    pub mean_trades: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSpec {
    pub mode: FeatureMode,
    pub family: Family,
    pub spec_label: String,
    pub mean_alpha: f64,
    pub mean_trades: f64,
    pub securities: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Partial,
    Failure,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::Partial => 1,
            Outcome::Failure => 2,
        }
    }

    fn from_counts(ok: usize, failed: usize) -> Self {
        match (ok, failed) {
            (_, 0) if ok > 0 => Outcome::Success,
            (0, _) => Outcome::Failure,
            _ => Outcome::Partial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterLog {
    pub config: ExperimentConfig,
    pub fingerprint: String,
    pub stages: Vec<Stage>,
    pub ingest: Vec<IngestRecord>,
    pub econometrics: Option<EconometricsLog>,
    pub runs: Vec<RunRecord>,
    pub family_averages: Vec<FamilyAverage>,
    pub best_specs: Vec<BestSpec>,
    pub warnings: Vec<String>,
    pub outcome: Outcome,
}

impl MasterLog {
    fn new(config: &ExperimentConfig) -> Self {
        MasterLog {
            config: config.clone(),
            fingerprint: config.fingerprint(),
            stages: Vec::new(),
            ingest: Vec::new(),
            econometrics: None,
            runs: Vec::new(),
            family_averages: Vec::new(),
            best_specs: Vec::new(),
            warnings: Vec::new(),
            outcome: Outcome::Failure,
        }
    }

    pub fn load(run_dir: impl AsRef<Path>) -> Result<Self> {
        let path = run_dir.as_ref().join("master.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Success when nothing failed, failure when nothing succeeded.
    pub fn compute_outcome(&self) -> Outcome {
        let mut ok = 0;
        let mut failed = 0;
        for r in &self.ingest {
            match r.status {
                RunStatus::Completed => ok += 1,
                RunStatus::Failed => failed += 1,
            }
        }
        for r in &self.runs {
            match r.status {
                RunStatus::Completed => ok += 1,
                RunStatus::Failed => failed += 1,
            }
        }
        if let Some(econ) = &self.econometrics {
            failed += econ.load_failures.len();
            match &econ.report {
                Some(report) => {
                    for e in &report.entries {
                        let tests =
                            std::iter::once(e.adf.ok().is_some()).chain(e.vr.iter().map(|(_, o)| o.ok().is_some()));
                        for passed in tests {
                            if passed {
                                ok += 1;
                            } else {
                                failed += 1;
                            }
                        }
                    }
                }
                None => failed += 1,
            }
        }
        Outcome::from_counts(ok, failed)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timing {
    pub stages: BTreeMap<String, f64>,
    /// `(ticker, mode, spec label, seconds)` per backtest unit.
    pub units: Vec<(String, FeatureMode, String, f64)>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub run_dir: PathBuf,
    pub master: MasterLog,
    pub timing: Timing,
}

/// Runs the requested stages and writes their artifacts under
/// [`ExperimentConfig::run_dir`]. A `master.json` left by an earlier
/// invocation with the same fingerprint is extended rather than replaced, so
/// stages can be run one verb at a time.
///
/// Errors only when the run directory cannot be written; everything else is
/// recorded in the returned log.
pub fn run_experiment(config: &ExperimentConfig, stages: &[Stage]) -> Result<RunOutput> {
    config.validate()?;
    let run_dir = config.run_dir();
    std::fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
    let mut master = match MasterLog::load(&run_dir) {
        Ok(previous) if previous.fingerprint == config.fingerprint() => MasterLog {
            config: config.clone(),
            ..previous
        },
        _ => MasterLog::new(config),
    };
    let mut timing = Timing::default();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;

    let mut stages: Vec<Stage> = stages.to_vec();
    stages.sort();
    stages.dedup();

    let needs_prices = stages.contains(&Stage::Ingest)
        || stages.contains(&Stage::Backtest)
        || (stages.contains(&Stage::Econ) && config.econometrics.universe.is_none());
    let mut loaded: Vec<(String, Result<PriceSeries>)> = Vec::new();
    if needs_prices {
        let t0 = Instant::now();
        loaded = pool.install(|| load_all(config, &config.securities));
        master.ingest = loaded
            .iter()
            .map(|(entry, r)| ingest_record(config, entry, r))
            .collect();
        timing.stages.insert("load".into(), t0.elapsed().as_secs_f64());
    }

    for &stage in &stages {
        let t0 = Instant::now();
        match stage {
            Stage::Ingest => write_ingest(&run_dir, &loaded)?,
            Stage::Econ => {
                let log = pool.install(|| run_econometrics(config, &loaded));
                write_file(&run_dir.join("econometrics.csv"), &econ_csv(&log))?;
                master.econometrics = Some(log);
            }
            Stage::Backtest => {
                let (runs, unit_times) = pool.install(|| run_backtests(config, &loaded, &run_dir))?;
                timing.units = unit_times;
                master.runs = runs;
                write_file(&run_dir.join("results.csv"), &results_csv(&master.runs)?)?;
            }
        }
        timing.stages.insert(stage.as_str().into(), t0.elapsed().as_secs_f64());
        if !master.stages.contains(&stage) {
            master.stages.push(stage);
            master.stages.sort();
        }
    }

    master.family_averages = family_averages(&master.runs);
    master.warnings.clear();
    master.best_specs.clear();
    if !master.runs.is_empty() {
        for mode in config.feature_mode.modes() {
            for &family in &config.families {
                match select_best_spec(&master.runs, mode, family) {
                    Some(best) => master.best_specs.push(best),
                    None => {
                        let msg = format!("{family} ({mode}): no completed run with an alpha; omitted from best specs");
                        log::warn!("{msg}");
                        master.warnings.push(msg);
                    }
                }
            }
        }
    }
    master.outcome = master.compute_outcome();

    write_file(&run_dir.join("config.toml"), &config.to_toml_string())?;
    write_file(&run_dir.join("master.json"), &to_json(&master))?;
    write_file(&run_dir.join("timing.json"), &to_json(&timing))?;
    Ok(RunOutput {
        run_dir,
        master,
        timing,
    })
}

/// Runs every stage and then writes the report.
pub fn run_all(config: &ExperimentConfig) -> Result<RunOutput> {
    let out = run_experiment(config, &Stage::ALL)?;
    emit_report(&out.master, &out.run_dir)?;
    Ok(out)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("log serializes to JSON");
    s.push('\n');
    s
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Filename-safe form of a ticker or spec label.
pub fn file_stem(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '=') {
            out.push(c);
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

fn load_all(config: &ExperimentConfig, entries: &[String]) -> Vec<(String, Result<PriceSeries>)> {
    entries
        .par_iter()
        .map(|entry| {
            let result = isolate(|| load_security(config, entry)).and_then(|series| {
                let quality = validate_with(&series, &config.quality);
                if quality.is_rejected() {
                    Err(Error::InvalidInput(format!(
                        "{} malformed rows, first: {:?}",
                        quality.malformed_rows.len(),
                        quality.malformed_rows[0]
                    )))
                } else {
                    Ok(series)
                }
            });
            (entry.clone(), result)
        })
        .collect()
}

fn ingest_record(config: &ExperimentConfig, entry: &str, result: &Result<PriceSeries>) -> IngestRecord {
    match result {
        Ok(series) => {
            let quality = validate_with(series, &config.quality);
            IngestRecord {
                entry: entry.to_string(),
                ticker: series.ticker().to_string(),
                status: RunStatus::Completed,
                reason: None,
                bars: series.len(),
                first_date: series.bars().first().map(|b| b.date),
                last_date: series.bars().last().map(|b| b.date),
                missing_date_gaps: quality.missing_dates.len(),
                outlier_flags: quality.outlier_flags.len(),
            }
        }
        Err(e) => IngestRecord {
            entry: entry.to_string(),
            ticker: entry.to_string(),
            status: RunStatus::Failed,
            reason: Some(e.to_string()),
            bars: 0,
            first_date: None,
            last_date: None,
            missing_date_gaps: 0,
            outlier_flags: 0,
        },
    }
}

fn write_ingest(run_dir: &Path, loaded: &[(String, Result<PriceSeries>)]) -> Result<()> {
    for (_, series) in loaded {
        let Ok(series) = series else { continue };
        let stem = file_stem(series.ticker());
        let mut buf = Vec::new();
        series.write_csv(&mut buf)?;
        write_file(
            &run_dir.join("prices").join(format!("{stem}.csv")),
            &String::from_utf8_lossy(&buf),
        )?;
        for mode in [FeatureMode::Trend, FeatureMode::Continuous] {
            if let Ok(table) = build_feature_table(series, mode) {
                let mut buf = Vec::new();
                table.write_csv(&mut buf)?;
                write_file(
                    &run_dir.join("features").join(format!("{stem}_{mode}.csv")),
                    &String::from_utf8_lossy(&buf),
                )?;
            }
        }
    }
    Ok(())
}

/// Reads a universe file: one entry per line, `#` comments and blank lines
/// ignored.
pub fn read_universe(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// Seeded sample of `size` entries, kept in universe order.
pub fn sample_universe(entries: &[String], size: Option<usize>, seed: u64) -> Vec<String> {
    match size {
        Some(n) if n < entries.len() => {
            let mut idx = sample(&mut sim::rng(seed), entries.len(), n).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| entries[i].clone()).collect()
        }
        _ => entries.to_vec(),
    }
}

fn run_econometrics(config: &ExperimentConfig, loaded: &[(String, Result<PriceSeries>)]) -> EconometricsLog {
    let econ = &config.econometrics;
    let mut log = EconometricsLog {
        sampled: Vec::new(),
        load_failures: Vec::new(),
        report: None,
    };
    if !econ.enabled {
        return log;
    }
    let universe_loaded;
    let source: &[(String, Result<PriceSeries>)] = match &econ.universe {
        Some(path) => match read_universe(&config.resolve(path)) {
            Ok(entries) => {
                let picked = sample_universe(&entries, econ.sample_size, config.seed);
                universe_loaded = load_all(config, &picked);
                &universe_loaded
            }
            Err(e) => {
                log.load_failures.push((path.display().to_string(), e.to_string()));
                return log;
            }
        },
        None => loaded,
    };
    let mut returns: Vec<ReturnSeries> = Vec::new();
    for (entry, series) in source {
        log.sampled.push(entry.clone());
        match series
            .as_ref()
            .map_err(Error::to_string)
            .and_then(|s| log_returns(s).map_err(|e| e.to_string()))
        {
            Ok(r) => returns.push(r),
            Err(reason) => log.load_failures.push((entry.clone(), reason)),
        }
    }
    if !returns.is_empty() {
        let mut batch = econ.batch_config();
        batch.t_stat_bin_width = config.report.t_stat_bin_width;
        batch.p_value_bin_width = config.report.p_value_bin_width;
        match run_batch(&returns, &batch) {
            Ok(report) => log.report = Some(report),
            Err(e) => log.load_failures.push(("batch".into(), e.to_string())),
        }
    }
    log
}

fn econ_csv(log: &EconometricsLog) -> String {
    match &log.report {
        Some(r) => r.to_csv(),
        None => String::from("ticker,test,k_or_lags,statistic,p_value\n"),
    }
}

/// Runs `f`, turning a panic into an error that carries its message.
pub fn isolate<T>(f: impl FnOnce() -> Result<T>) -> Result<T> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            Err(Error::InvalidInput(format!("panicked: {msg}")))
        }
    }
}

/// Applies `f` to every item on the current pool, isolating failures and
/// keeping input order.
pub fn run_isolated<I: Sync, T: Send>(items: &[I], f: impl Fn(&I) -> Result<T> + Sync) -> Vec<(Result<T>, f64)> {
    items
        .par_iter()
        .map(|item| {
            let t0 = Instant::now();
            let r = isolate(|| f(item));
            (r, t0.elapsed().as_secs_f64())
        })
        .collect()
}

struct Unit<'a> {
    ticker: String,
    mode: FeatureMode,
    spec: ModelSpec,
    prices: Option<&'a PriceSeries>,
    table: std::result::Result<&'a FeatureTable, String>,
}

struct UnitOutput {
    predictions: usize,
    flagged: usize,
    confusion: ConfusionMatrix,
    classification: ClassificationReport,
    trading: Option<TradingSummary>,
    predictions_csv: String,
    ledger_csv: Option<String>,
    benchmark_csv: Option<String>,
}

fn run_unit(config: &ExperimentConfig, unit: &Unit) -> Result<UnitOutput> {
    let table = unit.table.as_ref().map_err(|e| Error::InvalidInput(e.clone()))?;
    let prices = unit.prices.expect("prices exist whenever the table does");
    let wf = WalkForwardConfig {
        initial_training_days: config.walkforward.initial_training_days,
        refit_every: config.walkforward.refit_every,
        ..WalkForwardConfig::new(unit.spec, unit.mode)
    };
    let log = run_walk_forward(table, &wf)?;
    let confusion = summarize(&log)?;
    let classification = classification_report(&confusion)?;
    let (trading, ledger_csv, benchmark_csv) = if config.trading {
        let ledger = simulate(&log, prices, &config.trader)?;
        let bench = benchmark_for(&log, prices, &config.trader)?;
        let portfolio = portfolio_report(&ledger, &bench, config.trader.rf_daily())?;
        let mut lbuf = Vec::new();
        ledger.write_csv(&mut lbuf)?;
        let mut bbuf = Vec::new();
        bench.write_csv(&mut bbuf)?;
        let summary = TradingSummary {
            final_value: ledger.final_value(),
            buy_and_hold_final: bench.final_buy_and_hold(),
            risk_free_final: bench.final_risk_free(),
            total_costs: ledger.total_costs,
            forced_holds: ledger.forced_holds,
            portfolio,
        };
        (
            Some(summary),
            Some(String::from_utf8_lossy(&lbuf).into_owned()),
            Some(String::from_utf8_lossy(&bbuf).into_owned()),
        )
    } else {
        (None, None, None)
    };
    Ok(UnitOutput {
        predictions: log.len(),
        flagged: log.flagged(),
        confusion,
        classification,
        trading,
        predictions_csv: log.to_csv_string(),
        ledger_csv,
        benchmark_csv,
    })
}

type UnitTimes = Vec<(String, FeatureMode, String, f64)>;

fn run_backtests(
    config: &ExperimentConfig,
    loaded: &[(String, Result<PriceSeries>)],
    run_dir: &Path,
) -> Result<(Vec<RunRecord>, UnitTimes)> {
    let modes = config.feature_mode.modes();
    let specs = config.model_specs();

    let pairs: Vec<(usize, FeatureMode)> = (0..loaded.len())
        .flat_map(|i| modes.iter().map(move |&m| (i, m)))
        .collect();
    let tables: Vec<std::result::Result<FeatureTable, String>> = pairs
        .par_iter()
        .map(|&(i, mode)| match &loaded[i].1 {
            Ok(series) => isolate(|| build_feature_table(series, mode)).map_err(|e| e.to_string()),
            Err(e) => Err(format!("load failed: {e}")),
        })
        .collect();

    let mut units = Vec::with_capacity(pairs.len() * specs.len());
    for (p, &(i, mode)) in pairs.iter().enumerate() {
        let (entry, series) = &loaded[i];
        let ticker = series
            .as_ref()
            .map_or_else(|_| entry.clone(), |s| s.ticker().to_string());
        for &spec in &specs {
            units.push(Unit {
                ticker: ticker.clone(),
                mode,
                spec,
                prices: series.as_ref().ok(),
                table: tables[p].as_ref().map_err(Clone::clone),
            });
        }
    }

    let outputs = run_isolated(&units, |u| run_unit(config, u));

    let mut runs = Vec::with_capacity(units.len());
    let mut times = Vec::with_capacity(units.len());
    for (unit, (result, secs)) in units.iter().zip(outputs) {
        let label = unit.spec.label();
        times.push((unit.ticker.clone(), unit.mode, label.clone(), secs));
        let mut record = RunRecord {
            ticker: unit.ticker.clone(),
            mode: unit.mode,
            family: unit.spec.family(),
            spec_label: label.clone(),
            spec: unit.spec,
            status: RunStatus::Failed,
            reason: None,
            predictions: 0,
            flagged: 0,
            confusion: None,
            classification: None,
            trading: None,
            prediction_file: None,
            ledger_file: None,
            benchmark_file: None,
        };
        match result {
            Ok(out) => {
                let stem = format!("{}_{}_{}", file_stem(&unit.ticker), unit.mode, file_stem(&label));
                let pred = format!("predictions/{stem}.csv");
                write_file(&run_dir.join(&pred), &out.predictions_csv)?;
                record.prediction_file = Some(pred);
                if let Some(csv) = out.ledger_csv {
                    let path = format!("trades/{stem}.csv");
                    write_file(&run_dir.join(&path), &csv)?;
                    record.ledger_file = Some(path);
                }
                if let Some(csv) = out.benchmark_csv {
                    let path = format!("benchmarks/{}_{}.csv", file_stem(&unit.ticker), unit.mode);
                    let full = run_dir.join(&path);
                    write_file(&full, &csv)?;
                    record.benchmark_file = Some(path);
                }
                record.status = RunStatus::Completed;
                record.predictions = out.predictions;
                record.flagged = out.flagged;
                record.confusion = Some(out.confusion);
                record.classification = Some(out.classification);
                record.trading = out.trading;
            }
            Err(e) => {
                log::warn!("{} {} {}: {e}", unit.ticker, unit.mode, label);
                record.reason = Some(e.to_string());
            }
        }
        runs.push(record);
    }
    Ok((runs, times))
}

fn opt(v: Option<impl ToString>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per backtest unit; empty cells mark missing values.
pub fn results_csv(runs: &[RunRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "ticker",
        "mode",
        "family",
        "spec",
        "status",
        "reason",
        "predictions",
        "flagged",
        "accuracy",
        "f1",
        "final_value",
        "buy_and_hold",
        "risk_free",
        "total_return",
        "alpha",
        "beta",
        "sharpe",
        "sortino",
        "volatility",
        "trades",
        "total_costs",
        "forced_holds",
    ])?;
    for r in runs {
        let c = r.classification;
        let t = r.trading;
        let p = t.map(|t| t.portfolio);
        w.write_record([
            r.ticker.clone(),
            r.mode.to_string(),
            r.family.to_string(),
            r.spec_label.clone(),
            match r.status {
                RunStatus::Completed => "completed".into(),
                RunStatus::Failed => "failed".into(),
            },
            r.reason.clone().unwrap_or_default(),
            r.predictions.to_string(),
            r.flagged.to_string(),
            opt(c.map(|c| c.accuracy)),
            opt(c.and_then(|c| c.f1)),
            opt(t.map(|t| t.final_value)),
            opt(t.map(|t| t.buy_and_hold_final)),
            opt(t.map(|t| t.risk_free_final)),
            opt(p.map(|p| p.total_return)),
            opt(p.and_then(|p| p.alpha)),
            opt(p.and_then(|p| p.beta)),
            opt(p.and_then(|p| p.sharpe)),
            opt(p.and_then(|p| p.sortino)),
            opt(p.map(|p| p.volatility)),
            opt(p.map(|p| p.trade_count)),
            opt(t.map(|t| t.total_costs)),
            opt(t.map(|t| t.forced_holds)),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields is UTF-8"))
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Per (mode, family, spec) averages, in first-seen order.
pub fn family_averages(runs: &[RunRecord]) -> Vec<FamilyAverage> {
    let mut keys: Vec<(FeatureMode, Family, String)> = Vec::new();
    for r in runs {
        let key = (r.mode, r.family, r.spec_label.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(mode, family, spec_label)| {
            let group: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.mode == mode && r.family == family && r.spec_label == spec_label)
                .collect();
            let done: Vec<&&RunRecord> = group.iter().filter(|r| r.completed()).collect();
            let acc: Vec<f64> = done.iter().filter_map(|r| r.accuracy()).collect();
            let alpha: Vec<f64> = done.iter().filter_map(|r| r.alpha()).collect();
            let trades: Vec<f64> = done.iter().filter_map(|r| r.trade_count()).map(|t| t as f64).collect();
            FamilyAverage {
                mode,
                family,
                spec_label,
                completed: done.len(),
                failed: group.len() - done.len(),
                mean_accuracy: mean(&acc),
                mean_alpha: mean(&alpha),
                mean_trades: mean(&trades),
            }
        })
        .collect()
}

/// Spec of `family` with the highest mean alpha across securities in
/// `mode`. Ties go to fewer mean trades, then to the lexicographically
/// smaller label. `None` when the family has no completed run with an alpha.
pub fn select_best_spec(runs: &[RunRecord], mode: FeatureMode, family: Family) -> Option<BestSpec> {
    let mut groups: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in runs
        .iter()
        .filter(|r| r.mode == mode && r.family == family && r.completed())
    {
        if let (Some(alpha), Some(trades)) = (r.alpha(), r.trade_count()) {
            let g = groups.entry(&r.spec_label).or_default();
            g.0.push(alpha);
            g.1.push(trades as f64);
        }
    }
    let mut best: Option<BestSpec> = None;
    // BTreeMap iterates labels in ascending order, so keeping the first of
    // equal candidates implements the lexicographic tie-break.
    for (label, (alphas, trades)) in groups {
        let candidate = BestSpec {
            mode,
            family,
            spec_label: label.to_string(),
            mean_alpha: mean(&alphas).expect("group is non-empty"),
            mean_trades: mean(&trades).expect("group is non-empty"),
            securities: alphas.len(),
        };
        let better = match &best {
            None => true,
            Some(b) => {
                candidate.mean_alpha > b.mean_alpha
                    || (candidate.mean_alpha == b.mean_alpha && candidate.mean_trades < b.mean_trades)
            }
        };
        if better {
            best = Some(candidate);
        }
    }
    best
}

#[cfg(test)]
mod tests;
