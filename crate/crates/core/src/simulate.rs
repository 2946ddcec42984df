//! Seeded synthetic data for tests, benchmarks and Monte Carlo checks.

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{PriceBar, PriceSeries};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn iid_normal(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Cumulative sum of i.i.d. standard normal increments, starting at zero.
pub fn random_walk(len: usize, seed: u64) -> Vec<f64> {
    let mut level = 0.0;
    let mut out = Vec::with_capacity(len);
    for e in iid_normal(len, seed) {
        out.push(level);
        level += e;
    }
    out
}

/// Stationary AR(1): `x[t] = phi * x[t-1] + e[t]`, started from its
/// stationary distribution.
pub fn ar1(len: usize, phi: f64, seed: u64) -> Vec<f64> {
    let e = iid_normal(len, seed);
    let mut out = Vec::with_capacity(len);
    let mut prev = e.first().copied().unwrap_or(0.0) / (1.0 - phi * phi).sqrt();
    for (t, &shock) in e.iter().enumerate() {
        if t > 0 {
            prev = phi * prev + shock;
        }
        out.push(prev);
    }
    out
}

/// Weekdays starting at `start` (rolled forward off a weekend).
pub fn business_days(start: NaiveDate, len: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(len);
    let mut d = start;
    while out.len() < len {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date overflow");
    }
    out
}

/// Geometric Brownian motion bars with consistent OHLC on business days.
/// `drift` and `vol` are per-day log-return mean and standard deviation.
pub fn gbm_series(
    ticker: &str,
    start: NaiveDate,
    len: usize,
    initial: f64,
    drift: f64,
    vol: f64,
    seed: u64,
) -> PriceSeries {
    let mut rng = rng(seed);
    let dates = business_days(start, len);
    let mut close = initial;
    let mut bars = Vec::with_capacity(len);
    for (i, date) in dates.into_iter().enumerate() {
        let open = close;
        if i > 0 {
            let z: f64 = rng.sample(StandardNormal);
            close = open * (drift + vol * z).exp();
        }
        let wick_hi: f64 = rng.sample::<f64, _>(StandardNormal).abs() * vol * 0.5;
        let wick_lo: f64 = rng.sample::<f64, _>(StandardNormal).abs() * vol * 0.5;
        bars.push(PriceBar {
            date,
            open,
            high: open.max(close) * (1.0 + wick_hi),
            low: open.min(close) * (1.0 - wick_lo).max(0.5),
            close,
            adj_close: close,
            volume: rng.random_range(100_000..5_000_000),
        });
    }
    PriceSeries::new(ticker, bars).expect("business days are strictly increasing")
}
