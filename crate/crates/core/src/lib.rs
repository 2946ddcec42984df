//! Quantitative laboratory for weak-form market efficiency.
//!
//! The crate is organized as a pipeline:
//!
//! - [`data`]: CSV ingestion, quality checks and log returns.
//! - [`indicators`]: the ten technical indicators, their trend encoding and
//!   labeled feature tables.
//! - [`econometrics`]: Augmented Dickey-Fuller and Lo-MacKinlay variance-ratio tests.
//! - [`classifiers`]: logistic regression, SVM, random forest, KNN and
//!   Gaussian naive Bayes behind one fit/predict contract.
//! - [`walkforward`]: the daily retrain-predict loop.
//! - [`trading`]: the long-only trader and its benchmarks.
//! - [`metrics`]: classification ratios and portfolio statistics.
//! - [`harness`]: experiment orchestration and log emission.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifiers;
pub mod data;
pub mod econometrics;
mod error;
pub mod harness;
pub mod indicators;
mod linalg;
pub mod metrics;
pub mod simulate;
pub mod trading;
pub mod walkforward;

pub use classifiers::{Dataset, Family, Label, ModelSpec, TrainedModel};
pub use data::{PriceBar, PriceSeries, QualityReport, ReturnSeries};
pub use econometrics::{AdfResult, BatchTestReport, VrResult};
pub use error::{Error, Result};
pub use indicators::{FeatureMode, FeatureRow, FeatureTable, IndicatorVector};
pub use metrics::{ClassificationReport, ConfusionMatrix, PortfolioReport};
pub use trading::{BenchmarkTrack, TradeLedger, TraderConfig};
pub use walkforward::{PredictionLog, WalkForwardConfig};
