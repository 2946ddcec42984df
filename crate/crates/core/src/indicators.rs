//! Technical indicators, trend encoding and labeled feature tables.
//!
//! With window `n` (default 10), closes `C`, highs `H`, lows `L`, and
//! `HH`/`LL` the highest high and lowest low of the last `n` days:
//!
//! | indicator   | continuous form                                        |
//! |-------------|--------------------------------------------------------|
//! | SMA         | mean of the last `n` closes                            |
//! | WMA         | `sum(i * C[t-n+i]) / sum(i)`, weights `1..=n`           |
//! | Momentum    | `C[t] - C[t-(n-1)]`                                    |
//! | Stoch. K%   | `100 (C[t] - LL) / (HH - LL)`                          |
//! | Stoch. D%   | mean of the last `n` K% values                         |
//! | RSI         | `100 - 100 / (1 + avg_gain / avg_loss)` over `n` moves |
//! | MACD        | period-`n` EMA of `EMA12(C) - EMA26(C)`                 |
//! | Williams R% | `100 (HH - C[t]) / (HH - LL)`                          |
//! | A/D osc.    | `(H[t] - C[t-1]) / (H[t] - L[t])`                      |
//! | CCI         | `(M - SMA(M)) / (0.015 * mean_abs_dev(M))`, `M = (H+L+C)/3` |
//!
//! EMAs are seeded with the simple mean of their first period. Degenerate
//! windows emit neutral values: 50 for K%/R% when `HH == LL`, RSI 100 when
//! only gains occurred and 50 when the window is flat, A/D 0.5 when
//! `H == L`, CCI 0 when the mean absolute deviation is zero.
//!
//! Trend mode maps each indicator to `{-1, +1}`; every tie maps to `+1`.

use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::classifiers::{Dataset, Label};
use crate::data::PriceSeries;
use crate::{Error, Result};

pub const DEFAULT_WINDOW: usize = 10;
pub const N_INDICATORS: usize = 10;
pub const INDICATOR_NAMES: [&str; N_INDICATORS] = [
    "sma",
    "wma",
    "momentum",
    "stoch_k",
    "stoch_d",
    "rsi",
    "macd",
    "williams_r",
    "ad_osc",
    "cci",
];

const MACD_FAST: usize = 12;
const MACD_SLOW: usize = 26;
const RSI_OVERBOUGHT: f64 = 70.0;
const RSI_OVERSOLD: f64 = 30.0;
const CCI_BAND: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    Continuous,
    Trend,
}

impl FeatureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Continuous => "continuous",
            FeatureMode::Trend => "trend",
        }
    }
}

impl std::fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "continuous" => Ok(FeatureMode::Continuous),
            "trend" => Ok(FeatureMode::Trend),
            other => Err(Error::InvalidInput(format!("unknown feature mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorVector {
    pub sma: f64,
    pub wma: f64,
    pub momentum: f64,
    pub stoch_k: f64,
    pub stoch_d: f64,
    pub rsi: f64,
    pub macd: f64,
    pub williams_r: f64,
    pub ad_osc: f64,
    pub cci: f64,
}

impl IndicatorVector {
    pub fn to_array(&self) -> [f64; N_INDICATORS] {
        [
            self.sma,
            self.wma,
            self.momentum,
            self.stoch_k,
            self.stoch_d,
            self.rsi,
            self.macd,
            self.williams_r,
            self.ad_osc,
            self.cci,
        ]
    }

    pub fn from_array(v: [f64; N_INDICATORS]) -> Self {
        IndicatorVector {
            sma: v[0],
            wma: v[1],
            momentum: v[2],
            stoch_k: v[3],
            stoch_d: v[4],
            rsi: v[5],
            macd: v[6],
            williams_r: v[7],
            ad_osc: v[8],
            cci: v[9],
        }
    }
}

/// Seeded exponential moving average over `values[start..]`. Entries before
/// `start + period - 1` are `None`.
fn ema(values: &[Option<f64>], period: usize) -> Vec<Option<f64>> {
    let mut out = vec![None; values.len()];
    let Some(start) = values.iter().position(Option::is_some) else {
        return out;
    };
    if values.len() < start + period {
        return out;
    }
    let alpha = 2.0 / (period as f64 + 1.0);
    let seed_end = start + period - 1;
    let mut prev = values[start..=seed_end].iter().map(|v| v.unwrap()).sum::<f64>() / period as f64;
    out[seed_end] = Some(prev);
    for t in seed_end + 1..values.len() {
        let x = values[t].expect("EMA input has no gaps after its start");
        prev += alpha * (x - prev);
        out[t] = Some(prev);
    }
    out
}

fn range_ratio(numerator: f64, hh: f64, ll: f64) -> f64 {
    let span = hh - ll;
    if span > 0.0 {
        (100.0 * numerator / span).clamp(0.0, 100.0)
    } else {
        50.0
    }
}

/// Index of the first bar with every indicator defined.
pub fn warmup_len(window: usize) -> usize {
    (2 * window - 2).max(MACD_SLOW + window - 2).max(window)
}

/// Continuous indicators aligned with the bars; `None` during warm-up.
pub fn compute_continuous_indicators(series: &PriceSeries, window: usize) -> Vec<Option<IndicatorVector>> {
    let bars = series.bars();
    let len = bars.len();
    let n = window.max(2);
    let close: Vec<f64> = bars.iter().map(|b| b.close).collect();
    let high: Vec<f64> = bars.iter().map(|b| b.high).collect();
    let low: Vec<f64> = bars.iter().map(|b| b.low).collect();

    let wsum = (n * (n + 1) / 2) as f64;
    let mut stoch_k: Vec<Option<f64>> = vec![None; len];
    let mut williams: Vec<Option<f64>> = vec![None; len];
    for t in n - 1..len {
        let hh = high[t + 1 - n..=t].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ll = low[t + 1 - n..=t].iter().copied().fold(f64::INFINITY, f64::min);
        stoch_k[t] = Some(range_ratio(close[t] - ll, hh, ll));
        williams[t] = Some(range_ratio(hh - close[t], hh, ll));
    }

    let close_opt: Vec<Option<f64>> = close.iter().map(|&c| Some(c)).collect();
    let fast = ema(&close_opt, MACD_FAST);
    let slow = ema(&close_opt, MACD_SLOW);
    let diff: Vec<Option<f64>> = fast.iter().zip(&slow).map(|(f, s)| Some((*f)? - (*s)?)).collect();
    let macd = ema(&diff, n);

    let typical: Vec<f64> = (0..len).map(|t| (high[t] + low[t] + close[t]) / 3.0).collect();

    let first = warmup_len(n);
    let mut out = vec![None; len];
    for t in first..len {
        let closes = &close[t + 1 - n..=t];
        let sma = closes.iter().sum::<f64>() / n as f64;
        let wma = closes.iter().enumerate().map(|(i, c)| (i + 1) as f64 * c).sum::<f64>() / wsum;
        let momentum = close[t] - close[t + 1 - n];

        let k = stoch_k[t].unwrap();
        let d = stoch_k[t + 1 - n..=t].iter().map(|v| v.unwrap()).sum::<f64>() / n as f64;

        let (mut gain, mut loss) = (0.0, 0.0);
        for i in t + 1 - n..=t {
            let change = close[i] - close[i - 1];
            if change > 0.0 {
                gain += change;
            } else {
                loss -= change;
            }
        }
        let rsi = if loss > 0.0 {
            100.0 - 100.0 / (1.0 + gain / loss)
        } else if gain > 0.0 {
            100.0
        } else {
            50.0
        };

        let hl = high[t] - low[t];
        let ad = if hl > 0.0 { (high[t] - close[t - 1]) / hl } else { 0.5 };

        let window_m = &typical[t + 1 - n..=t];
        let sm = window_m.iter().sum::<f64>() / n as f64;
        let mad = window_m.iter().map(|m| (m - sm).abs()).sum::<f64>() / n as f64;
        let cci = if mad > 0.0 {
            (typical[t] - sm) / (0.015 * mad)
        } else {
            0.0
        };

        out[t] = Some(IndicatorVector {
            sma,
            wma,
            momentum,
            stoch_k: k,
            stoch_d: d,
            rsi,
            macd: macd[t].expect("MACD defined after warm-up"),
            williams_r: williams[t].unwrap(),
            ad_osc: ad,
            cci,
        });
    }
    out
}

fn sign_up(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn rising(now: f64, prev: f64) -> f64 {
    sign_up(now - prev)
}

fn banded(now: f64, prev: f64, lower: f64, upper: f64) -> f64 {
    if now > upper {
        -1.0
    } else if now < lower {
        1.0
    } else {
        rising(now, prev)
    }
}

/// Encodes continuous indicators as buy (+1) / sell (-1) signals. The first
/// defined row has no predecessor and is dropped.
pub fn trend_transform(continuous: &[Option<IndicatorVector>], closes: &[f64]) -> Vec<Option<IndicatorVector>> {
    assert_eq!(continuous.len(), closes.len(), "indicators and closes must align");
    let mut out = vec![None; continuous.len()];
    for t in 1..continuous.len() {
        let (Some(cur), Some(prev)) = (continuous[t], continuous[t - 1]) else {
            continue;
        };
        let c = closes[t];
        out[t] = Some(IndicatorVector {
            sma: sign_up(c - cur.sma),
            wma: sign_up(c - cur.wma),
            momentum: sign_up(cur.momentum),
            stoch_k: rising(cur.stoch_k, prev.stoch_k),
            stoch_d: rising(cur.stoch_d, prev.stoch_d),
            rsi: banded(cur.rsi, prev.rsi, RSI_OVERSOLD, RSI_OVERBOUGHT),
            macd: rising(cur.macd, prev.macd),
            // Falling R% means the close is moving toward the high.
            williams_r: rising(prev.williams_r, cur.williams_r),
            ad_osc: rising(cur.ad_osc, prev.ad_osc),
            cci: banded(cur.cci, prev.cci, -CCI_BAND, CCI_BAND),
        });
    }
    out
}

/// One trading day: that day's indicators and the next day's momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub date: NaiveDate,
    pub features: IndicatorVector,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub ticker: String,
    pub mode: FeatureMode,
    pub rows: Vec<FeatureRow>,
    pub warmup_rows_dropped: usize,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.rows.iter().map(|r| r.date).collect()
    }

    /// Dataset over `rows[range]`.
    pub fn dataset(&self, range: std::ops::Range<usize>) -> Dataset {
        let rows = &self.rows[range];
        let mut x = Vec::with_capacity(rows.len() * N_INDICATORS);
        for r in rows {
            x.extend_from_slice(&r.features.to_array());
        }
        Dataset::new(x, N_INDICATORS, rows.iter().map(|r| r.label).collect()).expect("feature rows have a fixed width")
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date"];
        header.extend(INDICATOR_NAMES);
        header.push("label");
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.date.to_string()];
            rec.extend(r.features.to_array().iter().map(f64::to_string));
            rec.push(r.label.as_u8().to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    /// Reads a table written by [`FeatureTable::write_csv`]. The warm-up count
    /// is not part of the file and reads back as zero.
    pub fn read_csv<R: Read>(ticker: &str, mode: FeatureMode, reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec?;
            let bad = |reason: String| Error::MalformedRow { row, reason };
            if rec.len() != N_INDICATORS + 2 {
                return Err(bad(format!("expected {} fields, got {}", N_INDICATORS + 2, rec.len())));
            }
            let date = rec[0].parse::<NaiveDate>().map_err(|e| bad(e.to_string()))?;
            let mut v = [0.0; N_INDICATORS];
            for (k, slot) in v.iter_mut().enumerate() {
                *slot = rec[k + 1]
                    .parse()
                    .map_err(|_| bad(format!("{} not numeric", INDICATOR_NAMES[k])))?;
            }
            let label = match &rec[N_INDICATORS + 1] {
                "0" => Label::Down,
                "1" => Label::Up,
                other => return Err(bad(format!("label `{other}` not in {{0,1}}"))),
            };
            rows.push(FeatureRow {
                date,
                features: IndicatorVector::from_array(v),
                label,
            });
        }
        Ok(FeatureTable {
            ticker: ticker.to_string(),
            mode,
            rows,
            warmup_rows_dropped: 0,
        })
    }
}

/// Builds the labeled table with the default window.
pub fn build_feature_table(series: &PriceSeries, mode: FeatureMode) -> Result<FeatureTable> {
    build_feature_table_with(series, mode, DEFAULT_WINDOW)
}

/// Pairs day-t features with the day-(t+1) momentum label (up iff
/// `adj_close[t+1] >= adj_close[t]`). Rows lacking full history are dropped
/// and counted; the final day has no label and produces no row.
pub fn build_feature_table_with(series: &PriceSeries, mode: FeatureMode, window: usize) -> Result<FeatureTable> {
    if window < 2 {
        return Err(Error::InvalidInput(format!("indicator window {window} < 2")));
    }
    let needed = warmup_len(window) + 1 + usize::from(mode == FeatureMode::Trend) + 1;
    if series.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            got: series.len(),
        });
    }
    let continuous = compute_continuous_indicators(series, window);
    let features = match mode {
        FeatureMode::Continuous => continuous,
        FeatureMode::Trend => trend_transform(&continuous, &series.closes()),
    };
    let bars = series.bars();
    let mut rows = Vec::with_capacity(bars.len());
    let mut dropped = 0;
    for t in 0..bars.len() - 1 {
        match features[t] {
            Some(f) => rows.push(FeatureRow {
                date: bars[t].date,
                features: f,
                label: Label::from_up(bars[t + 1].adj_close >= bars[t].adj_close),
            }),
            None => dropped += 1,
        }
    }
    Ok(FeatureTable {
        ticker: series.ticker().to_string(),
        mode,
        rows,
        warmup_rows_dropped: dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PriceBar;

    fn start() -> NaiveDate {
        NaiveDate::from_ymd_opt(2010, 1, 1).unwrap()
    }

    fn wiggly(len: usize, seed: u64) -> PriceSeries {
        crate::simulate::gbm_series("W", start(), len, 100.0, 0.0002, 0.015, seed)
    }

    #[test]
    fn constant_series_examples() {
        let s = PriceSeries::from_closes("C", start(), &[42.0; 60]).unwrap();
        let ind = compute_continuous_indicators(&s, 10);
        let v = ind.iter().flatten().next().unwrap();
        assert_eq!(v.sma, 42.0);
        assert_eq!(v.wma, 42.0);
        assert_eq!(v.momentum, 0.0);
        assert_eq!(v.macd, 0.0);
        // Flat window: degenerate oscillators fall back to neutral values.
        assert_eq!(v.stoch_k, 50.0);
        assert_eq!(v.williams_r, 50.0);
        assert_eq!(v.rsi, 50.0);
        assert_eq!(v.ad_osc, 0.5);
        assert_eq!(v.cci, 0.0);
    }

    #[test]
    fn ascending_closes_hand_values() {
        // Closes 1..=40; at the day with close 10 the window is 1..=10.
        let closes: Vec<f64> = (1..=40).map(f64::from).collect();
        let s = PriceSeries::from_closes("A", start(), &closes).unwrap();
        let ind = compute_continuous_indicators(&s, 10);
        let t = warmup_len(10);
        let v = ind[t].unwrap();
        let c = closes[t];
        assert_eq!(v.momentum, 9.0);
        assert!((v.sma - (c - 4.5)).abs() < 1e-12);
        assert!((v.wma - (c - 3.0)).abs() < 1e-12);
        // Only gains: RSI saturates.
        assert_eq!(v.rsi, 100.0);

        // Same formulas evaluated on exactly 1..=10 through a short window path.
        let closes10: Vec<f64> = (1..=10).map(f64::from).collect();
        let sma = closes10.iter().sum::<f64>() / 10.0;
        let wma = closes10
            .iter()
            .enumerate()
            .map(|(i, c)| (i + 1) as f64 * c)
            .sum::<f64>()
            / 55.0;
        assert_eq!(sma, 5.5);
        assert_eq!(wma, 7.0);
    }

    #[test]
    fn flat_high_low_window_is_neutral() {
        let mut bars = Vec::new();
        for i in 0..60u64 {
            let mut b = PriceBar::flat(start() + chrono::Days::new(i), 10.0);
            b.high = 10.0;
            b.low = 10.0;
            bars.push(b);
        }
        let s = PriceSeries::new("F", bars).unwrap();
        let v = compute_continuous_indicators(&s, 10)
            .into_iter()
            .flatten()
            .last()
            .unwrap();
        assert_eq!(v.stoch_k, 50.0);
        assert_eq!(v.williams_r, 50.0);
    }

    #[test]
    fn trend_rules() {
        let base = IndicatorVector::from_array([10.0, 10.0, 0.0, 40.0, 40.0, 50.0, 0.1, 60.0, 0.5, 0.0]);
        let mut cur = base;
        cur.rsi = 80.0;
        cur.cci = -250.0;
        let out = trend_transform(&[Some(base), Some(cur)], &[10.0, 11.0]);
        let v = out[1].unwrap();
        assert_eq!(v.sma, 1.0, "close above SMA");
        assert_eq!(v.momentum, 1.0, "zero momentum counts as up");
        assert_eq!(v.rsi, -1.0, "overbought");
        assert_eq!(v.cci, 1.0, "oversold CCI");
        assert_eq!(v.stoch_k, 1.0, "unchanged value ties to up");
        assert!(out[0].is_none());

        let out = trend_transform(&[Some(cur), Some(base)], &[11.0, 9.0]);
        let v = out[1].unwrap();
        assert_eq!(v.sma, -1.0);
        assert_eq!(v.rsi, -1.0, "RSI fell inside the band");
        assert_eq!(v.cci, 1.0, "CCI rose inside the band");
    }

    #[test]
    fn table_counts_and_labels() {
        let s = wiggly(2520, 7);
        for mode in [FeatureMode::Continuous, FeatureMode::Trend] {
            let table = build_feature_table(&s, mode).unwrap();
            assert_eq!(table.len(), 2520 - table.warmup_rows_dropped - 1);
            let expected_warmup = warmup_len(10) + usize::from(mode == FeatureMode::Trend);
            assert_eq!(table.warmup_rows_dropped, expected_warmup);
            let adj = s.adj_closes();
            for r in &table.rows {
                let t = s.position(r.date).unwrap();
                assert_eq!(r.label == Label::Up, adj[t + 1] >= adj[t]);
            }
        }
    }

    #[test]
    fn monotone_and_flat_series_label_up() {
        let rising: Vec<f64> = (0..80).map(|i| 10.0 + i as f64).collect();
        let s = PriceSeries::from_closes("R", start(), &rising).unwrap();
        assert!(build_feature_table(&s, FeatureMode::Trend)
            .unwrap()
            .rows
            .iter()
            .all(|r| r.label == Label::Up));
        let s = PriceSeries::from_closes("F", start(), &[5.0; 80]).unwrap();
        let t = build_feature_table(&s, FeatureMode::Continuous).unwrap();
        assert!(!t.is_empty());
        assert!(t.rows.iter().all(|r| r.label == Label::Up));
    }

    #[test]
    fn short_series_is_rejected() {
        let s = PriceSeries::from_closes("S", start(), &[5.0; 30]).unwrap();
        assert!(matches!(
            build_feature_table(&s, FeatureMode::Trend),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let table = build_feature_table(&wiggly(120, 3), FeatureMode::Continuous).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let back = FeatureTable::read_csv(&table.ticker, table.mode, buf.as_slice()).unwrap();
        assert_eq!(back.rows, table.rows);
    }

    #[test]
    fn no_look_ahead_beyond_label_bar() {
        // Rewriting every bar after t+1 leaves row t untouched.
        let s = wiggly(300, 11);
        let base = build_feature_table(&s, FeatureMode::Trend).unwrap();
        for cut in [60usize, 150, 250] {
            let mut bars = s.bars().to_vec();
            for b in bars.iter_mut().skip(cut + 2) {
                b.close *= 3.0;
                b.high *= 3.5;
                b.low *= 0.5;
                b.adj_close *= 3.0;
            }
            let mutated = PriceSeries::new("W", bars).unwrap();
            let m = build_feature_table(&mutated, FeatureMode::Trend).unwrap();
            let date = s.bars()[cut].date;
            let a = base.rows.iter().find(|r| r.date == date).unwrap();
            let b = m.rows.iter().find(|r| r.date == date).unwrap();
            assert_eq!(a, b);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_series() -> impl Strategy<Value = PriceSeries> {
            (any::<u64>(), 60usize..160).prop_map(|(seed, len)| wiggly(len, seed))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn trend_codomain_is_plus_minus_one(s in arb_series()) {
                let t = build_feature_table(&s, FeatureMode::Trend).unwrap();
                for r in &t.rows {
                    for v in r.features.to_array() {
                        prop_assert!(v == 1.0 || v == -1.0);
                    }
                }
            }

            #[test]
            fn oscillators_bounded_and_complementary(s in arb_series()) {
                for v in compute_continuous_indicators(&s, 10).into_iter().flatten() {
                    for x in [v.stoch_k, v.stoch_d, v.williams_r, v.rsi] {
                        prop_assert!((0.0..=100.0).contains(&x));
                    }
                    prop_assert!((v.stoch_k + v.williams_r - 100.0).abs() < 1e-9);
                }
            }

            #[test]
            fn scale_invariance(s in arb_series(), exp in -3i32..4, factor in 0.1f64..50.0) {
                let scale_series = |k: f64| {
                    let bars = s.bars().iter().map(|b| PriceBar {
                        open: b.open * k, high: b.high * k, low: b.low * k,
                        close: b.close * k, adj_close: b.adj_close * k, ..*b
                    }).collect();
                    PriceSeries::new("W", bars).unwrap()
                };
                // Arbitrary factors: bounded oscillators agree to rounding.
                let a = compute_continuous_indicators(&s, 10);
                let b = compute_continuous_indicators(&scale_series(factor), 10);
                for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
                    for (p, q) in [(x.stoch_k, y.stoch_k), (x.stoch_d, y.stoch_d),
                                   (x.williams_r, y.williams_r), (x.rsi, y.rsi)] {
                        prop_assert!((p - q).abs() < 1e-7, "{p} vs {q}");
                    }
                }
                // Power-of-two factors scale exactly, so trend signals must match bit for bit.
                let k = 2f64.powi(exp);
                let t1 = build_feature_table(&s, FeatureMode::Trend).unwrap();
                let t2 = build_feature_table(&scale_series(k), FeatureMode::Trend).unwrap();
                prop_assert_eq!(t1.rows, t2.rows);
            }
        }
    }
}
