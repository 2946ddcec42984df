//! ADF and variance-ratio tests across many securities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adf::{adf_test_with, AdfConfig, AdfResult};
use super::variance_ratio::{vr_test_m2, VrResult, DEFAULT_K_SET};
use crate::data::ReturnSeries;
use crate::metrics::Histogram;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum TestOutcome<T> {
    Ok(T),
    Failed { reason: String },
}

impl<T> TestOutcome<T> {
    pub fn ok(&self) -> Option<&T> {
        match self {
            TestOutcome::Ok(v) => Some(v),
            TestOutcome::Failed { .. } => None,
        }
    }
}

impl<T> From<Result<T>> for TestOutcome<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(v) => TestOutcome::Ok(v),
            Err(e) => TestOutcome::Failed { reason: e.to_string() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub adf: AdfConfig,
    pub k_set: Vec<usize>,
    pub t_stat_bin_width: f64,
    pub p_value_bin_width: f64,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig {
            adf: AdfConfig::default(),
            k_set: DEFAULT_K_SET.to_vec(),
            t_stat_bin_width: 1.0,
            p_value_bin_width: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityTests {
    pub ticker: String,
    pub adf: TestOutcome<AdfResult>,
    /// One entry per horizon in the configured `k_set`, in order.
    pub vr: Vec<(usize, TestOutcome<VrResult>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchTestReport {
    pub entries: Vec<SecurityTests>,
    pub adf_t_stat_histogram: Histogram,
    pub adf_p_value_histogram: Histogram,
    /// Variance-ratio p-value histogram per horizon.
    pub vr_p_value_histograms: Vec<(usize, Histogram)>,
}

impl BatchTestReport {
    /// Share of successful ADF tests rejecting at `level`.
    pub fn adf_rejection_rate(&self, level: f64) -> Option<f64> {
        let done: Vec<_> = self.entries.iter().filter_map(|e| e.adf.ok()).collect();
        (!done.is_empty()).then(|| done.iter().filter(|r| r.rejects_at(level)).count() as f64 / done.len() as f64)
    }

    /// Share of successful M2 tests at horizon `k` with p-value below `level`.
    pub fn vr_rejection_rate(&self, k: usize, level: f64) -> Option<f64> {
        let done: Vec<_> = self
            .entries
            .iter()
            .flat_map(|e| e.vr.iter())
            .filter(|(kk, _)| *kk == k)
            .filter_map(|(_, o)| o.ok())
            .collect();
        (!done.is_empty()).then(|| done.iter().filter(|r| r.p_value < level).count() as f64 / done.len() as f64)
    }

    /// Flat rows `ticker,test,k_or_lags,statistic,p_value`. Failed tests
    /// leave statistic and p-value empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ticker,test,k_or_lags,statistic,p_value\n");
        for e in &self.entries {
            match &e.adf {
                TestOutcome::Ok(r) => out.push_str(&format!(
                    "{},adf,{},{},{}\n",
                    e.ticker, r.lags_used, r.t_stat, r.p_value
                )),
                TestOutcome::Failed { .. } => out.push_str(&format!("{},adf,,,\n", e.ticker)),
            }
            for (k, o) in &e.vr {
                match o {
                    TestOutcome::Ok(r) => out.push_str(&format!("{},vr_m2,{k},{},{}\n", e.ticker, r.m2, r.p_value)),
                    TestOutcome::Failed { .. } => out.push_str(&format!("{},vr_m2,{k},,\n", e.ticker)),
                }
            }
        }
        out
    }
}

fn test_one(series: &ReturnSeries, config: &BatchConfig) -> SecurityTests {
    SecurityTests {
        ticker: series.ticker.clone(),
        adf: adf_test_with(&series.values, &config.adf).into(),
        vr: config
            .k_set
            .iter()
            .map(|&k| (k, vr_test_m2(&series.values, k).into()))
            .collect(),
    }
}

/// Runs every test on every security in parallel; entries keep input order
/// and a failing security does not stop the batch.
pub fn run_batch(securities: &[ReturnSeries], config: &BatchConfig) -> Result<BatchTestReport> {
    if securities.is_empty() {
        return Err(Error::InvalidInput("no securities to test".into()));
    }
    let entries: Vec<SecurityTests> = securities.par_iter().map(|s| test_one(s, config)).collect();

    let adf_ok: Vec<&AdfResult> = entries.iter().filter_map(|e| e.adf.ok()).collect();
    let t_stats: Vec<f64> = adf_ok.iter().map(|r| r.t_stat).collect();
    let p_values: Vec<f64> = adf_ok.iter().map(|r| r.p_value).collect();
    let vr_p_value_histograms = config
        .k_set
        .iter()
        .map(|&k| {
            let ps: Vec<f64> = entries
                .iter()
                .flat_map(|e| e.vr.iter())
                .filter(|(kk, _)| *kk == k)
                .filter_map(|(_, o)| o.ok().map(|r| r.p_value))
                .collect();
            (k, Histogram::new(&ps, config.p_value_bin_width))
        })
        .collect();

    Ok(BatchTestReport {
        adf_t_stat_histogram: Histogram::new(&t_stats, config.t_stat_bin_width),
        adf_p_value_histogram: Histogram::new(&p_values, config.p_value_bin_width),
        vr_p_value_histograms,
        entries,
    })
}
