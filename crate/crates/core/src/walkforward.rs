//! Daily retrain-predict loop.
//!
//! For each test row `t` the model is fit on rows `[0, t)` only, row `t` is
//! predicted, and the realized label of row `t` joins the training set for
//! the next day. Predictions are logged but never fed back as features.

use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::classifiers::{self, Label, ModelSpec, Scaling, TrainedModel};
use crate::indicators::{FeatureMode, FeatureTable};
use crate::metrics::ConfusionMatrix;
use crate::{Error, Result};

/// Smallest accepted initial training window.
pub const MIN_INITIAL_TRAINING_DAYS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkForwardConfig {
    pub initial_training_days: usize,
    pub spec: ModelSpec,
    pub mode: FeatureMode,
    /// Refit every `refit_every` test days; 1 refits daily.
    pub refit_every: usize,
}

impl WalkForwardConfig {
    pub fn new(spec: ModelSpec, mode: FeatureMode) -> Self {
        WalkForwardConfig {
            initial_training_days: 250,
            spec,
            mode,
            refit_every: 1,
        }
    }

    /// Continuous features are standardized on each training window; trend
    /// features are already in `{-1, +1}`.
    pub fn scaling(&self) -> Scaling {
        match self.mode {
            FeatureMode::Continuous => Scaling::Standardize,
            FeatureMode::Trend => Scaling::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordFlag {
    /// Training window held one class only; predicted up.
    SingleClass,
    /// Fitting failed; predicted up.
    FitError,
    /// The model was used even though its solver hit the iteration cap.
    NotConverged,
}

impl RecordFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordFlag::SingleClass => "single_class",
            RecordFlag::FitError => "fit_error",
            RecordFlag::NotConverged => "not_converged",
        }
    }

    fn parse(s: &str) -> Result<Option<Self>> {
        Ok(match s {
            "" => None,
            "single_class" => Some(RecordFlag::SingleClass),
            "fit_error" => Some(RecordFlag::FitError),
            "not_converged" => Some(RecordFlag::NotConverged),
            other => return Err(Error::InvalidInput(format!("unknown prediction flag `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub date: NaiveDate,
    pub predicted: Label,
    pub actual: Label,
    /// Rows the predicting model was trained on.
    pub train_size: usize,
    pub flag: Option<RecordFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionLog {
    pub ticker: String,
    pub records: Vec<PredictionRecord>,
}

impl PredictionLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.records.iter().map(|r| r.date).collect()
    }

    pub fn predictions(&self) -> Vec<Label> {
        self.records.iter().map(|r| r.predicted).collect()
    }

    pub fn flagged(&self) -> usize {
        self.records.iter().filter(|r| r.flag.is_some()).count()
    }

    /// Same dates and actual labels, with the realized label as the
    /// prediction on every day.
    pub fn oracle(&self) -> PredictionLog {
        PredictionLog {
            ticker: self.ticker.clone(),
            records: self
                .records
                .iter()
                .map(|r| PredictionRecord {
                    predicted: r.actual,
                    flag: None,
                    ..*r
                })
                .collect(),
        }
    }

    /// CSV with header `date,predicted,actual,train_size,flag`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "predicted", "actual", "train_size", "flag"])?;
        for r in &self.records {
            w.write_record([
                r.date.to_string(),
                r.predicted.as_u8().to_string(),
                r.actual.as_u8().to_string(),
                r.train_size.to_string(),
                r.flag.map_or("", RecordFlag::as_str).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<prediction log>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }

    pub fn read_csv<R: Read>(ticker: &str, reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut records = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let bad = |reason: String| Error::MalformedRow { row: i + 1, reason };
            if row.len() != 5 {
                return Err(bad(format!("expected 5 fields, found {}", row.len())));
            }
            let label = |s: &str| {
                s.parse::<i64>()
                    .map_err(|e| bad(e.to_string()))
                    .and_then(|c| Label::from_code(c).map_err(|e| bad(e.to_string())))
            };
            records.push(PredictionRecord {
                date: row[0].parse().map_err(|e: chrono::ParseError| bad(e.to_string()))?,
                predicted: label(&row[1])?,
                actual: label(&row[2])?,
                train_size: row[3]
                    .parse()
                    .map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                flag: RecordFlag::parse(&row[4])?,
            });
        }
        Ok(PredictionLog {
            ticker: ticker.to_string(),
            records,
        })
    }
}

fn fit_window(
    table: &FeatureTable,
    t: usize,
    config: &WalkForwardConfig,
) -> (Option<TrainedModel>, Option<RecordFlag>) {
    let train = table.dataset(0..t);
    if !train.has_both_classes() {
        return (None, Some(RecordFlag::SingleClass));
    }
    match classifiers::fit(&config.spec, &train, config.scaling()) {
        Ok(m) => {
            let flag = (!m.diagnostics.converged).then_some(RecordFlag::NotConverged);
            (Some(m), flag)
        }
        Err(e) => {
            log::warn!("{} day {}: fit failed: {e}", config.spec, table.rows[t].date);
            (None, Some(RecordFlag::FitError))
        }
    }
}

/// Runs the walk-forward protocol over every row after the initial window.
pub fn run_walk_forward(table: &FeatureTable, config: &WalkForwardConfig) -> Result<PredictionLog> {
    let start = config.initial_training_days;
    if start < MIN_INITIAL_TRAINING_DAYS {
        return Err(Error::InvalidInput(format!(
            "initial training window {start} is below the minimum of {MIN_INITIAL_TRAINING_DAYS}"
        )));
    }
    if table.len() <= start + 1 {
        return Err(Error::InsufficientData {
            needed: start + 2,
            got: table.len(),
        });
    }
    if table.mode != config.mode {
        return Err(Error::InvalidInput(format!(
            "feature table is {} but the run expects {}",
            table.mode, config.mode
        )));
    }
    if config.refit_every == 0 {
        return Err(Error::InvalidInput("refit_every must be at least 1".into()));
    }

    let mut records = Vec::with_capacity(table.len() - start);
    let mut current: (Option<TrainedModel>, Option<RecordFlag>, usize) = (None, None, 0);
    for t in start..table.len() {
        if (t - start).is_multiple_of(config.refit_every) {
            let (model, flag) = fit_window(table, t, config);
            current = (model, flag, t);
        }
        let row = &table.rows[t];
        let predicted = match &current.0 {
            Some(m) => m.predict(&row.features.to_array()),
            None => Label::Up,
        };
        records.push(PredictionRecord {
            date: row.date,
            predicted,
            actual: row.label,
            train_size: current.2,
            flag: current.1,
        });
    }
    Ok(PredictionLog {
        ticker: table.ticker.clone(),
        records,
    })
}

/// Confusion matrix with up as the positive class.
pub fn summarize(log: &PredictionLog) -> Result<ConfusionMatrix> {
    if log.is_empty() {
        return Err(Error::InvalidInput("empty prediction log".into()));
    }
    Ok(ConfusionMatrix::from_pairs(
        log.records.iter().map(|r| (r.predicted, r.actual)),
    ))
}
