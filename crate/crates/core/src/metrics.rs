//! Classification ratios and portfolio performance statistics.
//!
//! The confusion matrix treats "price up" as positive, with predictions on
//! rows and realized moves on columns:
//!
//! |                | actual up | actual down |
//! |----------------|-----------|-------------|
//! | predicted up   | TP        | FP          |
//! | predicted down | FN        | TN          |
//!
//! The eight ratios follow the study's printed definitions, which pair their
//! denominators differently from the textbook names. For readers used to the
//! usual conventions:
//!
//! | field | formula          | conventional name            |
//! |-------|------------------|------------------------------|
//! | `tpr` | TP / (TP + FP)   | precision (PPV)              |
//! | `fpr` | FP / (FP + TP)   | false discovery rate         |
//! | `tnr` | TN / (TN + FN)   | negative predictive value    |
//! | `fnr` | FN / (FN + TN)   | false omission rate          |
//! | `ppv` | TP / (TP + FN)   | recall / sensitivity (TPR)   |
//! | `fdr` | FN / (TP + FN)   | miss rate (FNR)              |
//! | `npv` | TN / (TN + FP)   | specificity (TNR)            |
//! | `for_`| FP / (TN + FP)   | fall-out (FPR)               |
//!
//! Each printed pair sums to one: `tpr + fpr`, `tnr + fnr`, `ppv + fdr`,
//! `npv + for_`.

use serde::{Deserialize, Serialize};

use crate::classifiers::Label;
use crate::trading::{BenchmarkTrack, TradeLedger};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn record(&mut self, predicted: Label, actual: Label) {
        match (predicted, actual) {
            (Label::Up, Label::Up) => self.tp += 1,
            (Label::Up, Label::Down) => self.fp += 1,
            (Label::Down, Label::Up) => self.fn_ += 1,
            (Label::Down, Label::Down) => self.tn += 1,
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut cm = ConfusionMatrix::default();
        for (p, a) in pairs {
            cm.record(p, a);
        }
        cm
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub tpr: Option<f64>,
    pub fnr: Option<f64>,
    pub tnr: Option<f64>,
    pub fpr: Option<f64>,
    pub ppv: Option<f64>,
    pub fdr: Option<f64>,
    pub npv: Option<f64>,
    pub for_: Option<f64>,
    pub accuracy: f64,
    pub f1: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn classification_report(cm: &ConfusionMatrix) -> Result<ClassificationReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidInput("empty confusion matrix".into()));
    }
    let ConfusionMatrix { tp, fp, fn_, tn } = *cm;
    Ok(ClassificationReport {
        tpr: ratio(tp, tp + fp),
        fnr: ratio(fn_, fn_ + tn),
        tnr: ratio(tn, tn + fn_),
        fpr: ratio(fp, fp + tp),
        ppv: ratio(tp, tp + fn_),
        fdr: ratio(fn_, tp + fn_),
        npv: ratio(tn, tn + fp),
        for_: ratio(fp, tn + fp),
        accuracy: (tp + tn) as f64 / total as f64,
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    /// Report volatility, Sharpe and Sortino per year and alpha per year
    /// instead of over the whole period.
    pub annualize: bool,
}

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortfolioReport {
    /// Compounded `final / initial - 1`.
    pub total_return: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub volatility: f64,
    pub sharpe: Option<f64>,
    pub sortino: Option<f64>,
    pub trade_count: usize,
    /// Number of daily returns the statistics are computed over.
    pub periods: usize,
}

/// Simple daily returns of a value path.
pub fn daily_returns(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[1] / w[0] - 1.0).collect()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Portfolio statistics from aligned daily portfolio (`rp`) and benchmark
/// (`rm`) returns and a per-day risk-free rate.
///
/// Alpha is accumulated arithmetically over the period:
/// `N * (mean(rp) - [rf + (mean(rm) - rf) * beta])`. Volatility is the
/// population standard deviation and the downside deviation only counts
/// returns below `rf` (divided by all `N`).
pub fn portfolio_stats(
    rp: &[f64],
    rm: &[f64],
    rf_daily: f64,
    total_return: f64,
    trade_count: usize,
    options: &MetricOptions,
) -> Result<PortfolioReport> {
    if rp.len() != rm.len() {
        return Err(Error::InvalidInput(format!(
            "portfolio and benchmark returns differ in length ({} vs {})",
            rp.len(),
            rm.len()
        )));
    }
    if rp.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let n = rp.len() as f64;
    let mp = mean(rp);
    let mm = mean(rm);
    let var_m = rm.iter().map(|r| (r - mm).powi(2)).sum::<f64>() / n;
    let cov = rp.iter().zip(rm).map(|(p, m)| (p - mp) * (m - mm)).sum::<f64>() / n;
    let beta = (var_m > 0.0).then(|| cov / var_m);

    let volatility = (rp.iter().map(|r| (r - mp).powi(2)).sum::<f64>() / n).sqrt();
    let downside = (rp
        .iter()
        .filter(|&&r| r < rf_daily)
        .map(|r| (r - rf_daily).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let excess = mp - rf_daily;
    let sharpe = (volatility > 0.0).then(|| excess / volatility);
    let sortino = (downside > 0.0).then(|| excess / downside);
    let alpha_daily = beta.map(|b| mp - (rf_daily + (mm - rf_daily) * b));

    let (alpha, volatility, sharpe, sortino) = if options.annualize {
        let root = TRADING_DAYS_PER_YEAR.sqrt();
        (
            alpha_daily.map(|a| a * TRADING_DAYS_PER_YEAR),
            volatility * root,
            sharpe.map(|s| s * root),
            sortino.map(|s| s * root),
        )
    } else {
        (alpha_daily.map(|a| a * n), volatility, sharpe, sortino)
    };

    Ok(PortfolioReport {
        total_return,
        alpha,
        beta,
        volatility,
        sharpe,
        sortino,
        trade_count,
        periods: rp.len(),
    })
}

/// Statistics of a value path against a benchmark value path.
pub fn portfolio_report_from_values(
    values: &[f64],
    benchmark: &[f64],
    rf_daily: f64,
    trade_count: usize,
    options: &MetricOptions,
) -> Result<PortfolioReport> {
    if values.len() < 2 || values.len() != benchmark.len() {
        return Err(Error::InvalidInput(format!(
            "need aligned value paths of length >= 2 (got {} and {})",
            values.len(),
            benchmark.len()
        )));
    }
    if values.iter().chain(benchmark).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput("value paths must stay positive".into()));
    }
    let total_return = values[values.len() - 1] / values[0] - 1.0;
    portfolio_stats(
        &daily_returns(values),
        &daily_returns(benchmark),
        rf_daily,
        total_return,
        trade_count,
        options,
    )
}

/// Statistics of a trade ledger against its buy-and-hold benchmark.
pub fn portfolio_report(ledger: &TradeLedger, bench: &BenchmarkTrack, rf_daily: f64) -> Result<PortfolioReport> {
    portfolio_report_with(ledger, bench, rf_daily, &MetricOptions::default())
}

pub fn portfolio_report_with(
    ledger: &TradeLedger,
    bench: &BenchmarkTrack,
    rf_daily: f64,
    options: &MetricOptions,
) -> Result<PortfolioReport> {
    if ledger.dates() != bench.dates {
        return Err(Error::InvalidInput("ledger and benchmark dates are not aligned".into()));
    }
    portfolio_report_from_values(
        &ledger.values(),
        &bench.buy_and_hold,
        rf_daily,
        ledger.trade_count,
        options,
    )
}

/// Fixed-width histogram with bins aligned to multiples of `width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub width: f64,
    /// `(bin_start, count)` for every bin between the lowest and highest
    /// occupied bin, in ascending order.
    pub bins: Vec<(f64, usize)>,
}

impl Histogram {
    pub fn new(values: &[f64], width: f64) -> Self {
        assert!(width > 0.0, "histogram width must be positive");
        let index = |v: f64| (v / width + 1e-9).floor() as i64;
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let (Some(lo), Some(hi)) = (
            finite.iter().map(|&v| index(v)).min(),
            finite.iter().map(|&v| index(v)).max(),
        ) else {
            return Histogram {
                width,
                bins: Vec::new(),
            };
        };
        let mut counts = vec![0usize; (hi - lo + 1) as usize];
        for &v in &finite {
            counts[(index(v) - lo) as usize] += 1;
        }
        Histogram {
            width,
            bins: counts
                .into_iter()
                .enumerate()
                .map(|(i, c)| ((lo + i as i64) as f64 * width, c))
                .collect(),
        }
    }

    pub fn occupied(&self) -> usize {
        self.bins.iter().filter(|b| b.1 > 0).count()
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.1).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start,bin_end,count\n");
        for (start, count) in &self.bins {
            out.push_str(&format!("{start},{},{count}\n", start + self.width));
        }
        out
    }
}
