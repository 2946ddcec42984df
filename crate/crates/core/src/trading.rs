//! Long-only trader driven by a prediction log, plus its benchmarks.
//!
//! The trader is either liquid (all cash) or invested (a share position
//! plus residual cash). An up prediction while liquid buys as many shares
//! as the cash allows after the transaction cost; a down prediction while
//! invested sells the whole position. Everything else is a hold, so at most
//! one trade happens per day. Trades execute at that day's adjusted close
//! and cash earns the daily risk-free rate from the second day on.

use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::classifiers::Label;
use crate::data::PriceSeries;
use crate::metrics::TRADING_DAYS_PER_YEAR;
use crate::walkforward::PredictionLog;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraderConfig {
    pub principal: f64,
    pub cost_per_trade: f64,
    pub rf_annual: f64,
    pub allow_fractional_shares: bool,
}

impl Default for TraderConfig {
    fn default() -> Self {
        TraderConfig {
            principal: 100_000.0,
            cost_per_trade: 4.95,
            rf_annual: 0.02,
            allow_fractional_shares: false,
        }
    }
}

impl TraderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.principal > 0.0) || !self.principal.is_finite() {
            return Err(Error::Config(format!(
                "principal must be positive, got {}",
                self.principal
            )));
        }
        if !(self.cost_per_trade >= 0.0) || !self.cost_per_trade.is_finite() {
            return Err(Error::Config(format!(
                "cost per trade must be non-negative, got {}",
                self.cost_per_trade
            )));
        }
        if !(self.rf_annual > -1.0) || !self.rf_annual.is_finite() {
            return Err(Error::Config(format!("invalid risk-free rate {}", self.rf_annual)));
        }
        Ok(())
    }

    /// `(1 + rf_annual)^(1/252) - 1`.
    pub fn rf_daily(&self) -> f64 {
        daily_rate(self.rf_annual)
    }

    /// Shares affordable with `cash` after paying one transaction cost.
    fn affordable(&self, cash: f64, price: f64) -> f64 {
        let budget = cash - self.cost_per_trade;
        if budget <= 0.0 {
            return 0.0;
        }
        if self.allow_fractional_shares {
            budget / price
        } else {
            let mut n = (budget / price).floor();
            while n > 0.0 && n * price > budget {
                n -= 1.0;
            }
            n
        }
    }
}

pub fn daily_rate(rf_annual: f64) -> f64 {
    (1.0 + rf_annual).powf(1.0 / TRADING_DAYS_PER_YEAR) - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Buy,
    Sell,
    Hold,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Buy => "buy",
            Action::Sell => "sell",
            Action::Hold => "hold",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerRecord {
    pub date: NaiveDate,
    pub action: Action,
    pub price: f64,
    /// Position after the day's action.
    pub shares: f64,
    pub cash: f64,
    pub value: f64,
    pub cost_paid: f64,
    /// Interest credited to cash at the start of the day.
    pub interest: f64,
    /// A trade signal that could not be executed and became a hold.
    pub forced_hold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeLedger {
    pub ticker: String,
    pub config: TraderConfig,
    pub records: Vec<LedgerRecord>,
    pub trade_count: usize,
    pub total_costs: f64,
    pub forced_holds: usize,
}

impl TradeLedger {
    pub fn final_value(&self) -> f64 {
        self.records.last().map_or(self.config.principal, |r| r.value)
    }

    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.value).collect()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.records.iter().map(|r| r.date).collect()
    }

    /// CSV with header `date,action,price,shares,cash,value,cost_paid`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "action", "price", "shares", "cash", "value", "cost_paid"])?;
        for r in &self.records {
            w.write_record([
                r.date.to_string(),
                r.action.as_str().to_string(),
                r.price.to_string(),
                r.shares.to_string(),
                r.cash.to_string(),
                r.value.to_string(),
                r.cost_paid.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<trade ledger>", e))?;
        Ok(())
    }
}

/// Adjusted closes on exactly the given dates.
fn prices_on(dates: &[NaiveDate], prices: &PriceSeries) -> Result<Vec<f64>> {
    dates
        .iter()
        .map(|&d| {
            prices
                .position(d)
                .map(|i| prices.bars()[i].adj_close)
                .ok_or_else(|| Error::InvalidInput(format!("no price bar for {d}")))
        })
        .collect()
}

/// Replays `log` through the trader state machine.
pub fn simulate(log: &PredictionLog, prices: &PriceSeries, config: &TraderConfig) -> Result<TradeLedger> {
    config.validate()?;
    if log.is_empty() {
        return Err(Error::InvalidInput("empty prediction log".into()));
    }
    let dates = log.dates();
    let px = prices_on(&dates, prices)?;
    let growth = 1.0 + config.rf_daily();

    let mut cash = config.principal;
    let mut shares = 0.0_f64;
    let mut records = Vec::with_capacity(log.len());
    let (mut trades, mut costs, mut forced) = (0, 0.0, 0);
    for (i, (rec, &price)) in log.records.iter().zip(&px).enumerate() {
        let interest = if i > 0 { cash * (growth - 1.0) } else { 0.0 };
        cash += interest;
        let mut action = Action::Hold;
        let mut cost_paid = 0.0;
        let mut forced_hold = false;
        match (rec.predicted, shares > 0.0) {
            (Label::Up, false) => {
                let n = config.affordable(cash, price);
                if n > 0.0 {
                    cash = if config.allow_fractional_shares {
                        0.0
                    } else {
                        (cash - config.cost_per_trade) - n * price
                    };
                    shares = n;
                    action = Action::Buy;
                    cost_paid = config.cost_per_trade;
                } else {
                    forced_hold = true;
                }
            }
            (Label::Down, true) => {
                let proceeds = shares * price;
                if cash + proceeds >= config.cost_per_trade {
                    cash += proceeds - config.cost_per_trade;
                    shares = 0.0;
                    action = Action::Sell;
                    cost_paid = config.cost_per_trade;
                } else {
                    forced_hold = true;
                }
            }
            _ => {}
        }
        if action != Action::Hold {
            trades += 1;
            costs += cost_paid;
        }
        if forced_hold {
            forced += 1;
            log::warn!(
                "{} {}: {:?} signal converted to a hold",
                log.ticker,
                rec.date,
                rec.predicted
            );
        }
        records.push(LedgerRecord {
            date: rec.date,
            action,
            price,
            shares,
            cash,
            value: cash + shares * price,
            cost_paid,
            interest,
            forced_hold,
        });
    }
    Ok(TradeLedger {
        ticker: log.ticker.clone(),
        config: *config,
        records,
        trade_count: trades,
        total_costs: costs,
        forced_holds: forced,
    })
}

/// Buy-and-hold and risk-free value paths over the same dates as a ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTrack {
    pub dates: Vec<NaiveDate>,
    pub buy_and_hold: Vec<f64>,
    pub risk_free: Vec<f64>,
    pub shares: f64,
}

impl BenchmarkTrack {
    pub fn final_buy_and_hold(&self) -> f64 {
        *self.buy_and_hold.last().expect("benchmark is never empty")
    }

    pub fn final_risk_free(&self) -> f64 {
        *self.risk_free.last().expect("benchmark is never empty")
    }

    /// CSV with header `date,buy_and_hold,risk_free`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "buy_and_hold", "risk_free"])?;
        for ((d, b), r) in self.dates.iter().zip(&self.buy_and_hold).zip(&self.risk_free) {
            w.write_record([d.to_string(), b.to_string(), r.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<benchmark>", e))?;
        Ok(())
    }
}

/// One buy on the first day (one transaction cost), held to the end; the
/// residual cash and the risk-free track compound at the daily rate.
pub fn benchmark(prices: &PriceSeries, config: &TraderConfig) -> Result<BenchmarkTrack> {
    config.validate()?;
    if prices.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let px = prices.adj_closes();
    let growth = 1.0 + config.rf_daily();
    let shares = config.affordable(config.principal, px[0]);
    let mut cash = if shares > 0.0 {
        if config.allow_fractional_shares {
            0.0
        } else {
            (config.principal - config.cost_per_trade) - shares * px[0]
        }
    } else {
        config.principal
    };
    let mut rf = config.principal;
    let mut buy_and_hold = Vec::with_capacity(px.len());
    let mut risk_free = Vec::with_capacity(px.len());
    for (i, p) in px.iter().enumerate() {
        if i > 0 {
            cash *= growth;
            rf *= growth;
        }
        buy_and_hold.push(cash + shares * p);
        risk_free.push(rf);
    }
    Ok(BenchmarkTrack {
        dates: prices.dates().collect(),
        buy_and_hold,
        risk_free,
        shares,
    })
}

/// Benchmark over exactly the dates of a prediction log.
pub fn benchmark_for(log: &PredictionLog, prices: &PriceSeries, config: &TraderConfig) -> Result<BenchmarkTrack> {
    benchmark(&prices.select(&log.dates())?, config)
}
