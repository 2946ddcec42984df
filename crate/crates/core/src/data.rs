//! Daily price ingestion, quality assurance and log returns.
//!
//! Input files follow a fixed schema, one security per file with the file
//! stem as ticker:
//!
//! ```text
//! date,open,high,low,close,adj_close,volume
//! 2010-01-04,101.5,102.0,100.9,101.8,95.2,1200300
//! ```
//!
//! Only `adj_close` feeds returns and trading; `high`, `low` and `close` feed
//! the indicators that need them.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const CSV_HEADER: [&str; 7] = ["date", "open", "high", "low", "close", "adj_close", "volume"];
const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub adj_close: f64,
    pub volume: u64,
}

impl PriceBar {
    /// Bar with all prices equal to `price`.
    pub fn flat(date: NaiveDate, price: f64) -> Self {
        PriceBar {
            date,
            open: price,
            high: price,
            low: price,
            close: price,
            adj_close: price,
            volume: 0,
        }
    }

    /// Describes the first violated bar invariant, if any.
    pub fn check(&self) -> Option<String> {
        let prices = [self.open, self.high, self.low, self.close, self.adj_close];
        if prices.iter().any(|p| !p.is_finite()) {
            return Some("non-finite price".into());
        }
        if self.adj_close <= 0.0 {
            return Some(format!("adj_close {} is not positive", self.adj_close));
        }
        let lo_body = self.open.min(self.close);
        let hi_body = self.open.max(self.close);
        if !(self.low <= lo_body && hi_body <= self.high) {
            return Some(format!(
                "inconsistent range: low {} open {} close {} high {}",
                self.low, self.open, self.close, self.high
            ));
        }
        None
    }
}

/// Date-ordered bars for one security. Dates are strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    ticker: String,
    bars: Vec<PriceBar>,
}

impl PriceSeries {
    /// Builds a series, sorting bars by date. Duplicate dates and empty input
    /// are rejected.
    pub fn new(ticker: impl Into<String>, mut bars: Vec<PriceBar>) -> Result<Self> {
        if bars.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        bars.sort_by_key(|b| b.date);
        if let Some(w) = bars.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(Error::InvalidInput(format!("duplicate date {}", w[0].date)));
        }
        Ok(PriceSeries {
            ticker: ticker.into(),
            bars,
        })
    }

    /// Series where every price field equals the given adjusted close.
    pub fn from_closes(ticker: impl Into<String>, start: NaiveDate, closes: &[f64]) -> Result<Self> {
        let bars = closes
            .iter()
            .enumerate()
            .map(|(i, &p)| PriceBar::flat(start + chrono::Days::new(i as u64), p))
            .collect();
        Self::new(ticker, bars)
    }

    pub fn ticker(&self) -> &str {
        &self.ticker
    }

    pub fn bars(&self) -> &[PriceBar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.bars.iter().map(|b| b.date)
    }

    pub fn adj_closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.adj_close).collect()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.close).collect()
    }

    /// Index of the bar dated `date`.
    pub fn position(&self, date: NaiveDate) -> Option<usize> {
        self.bars.binary_search_by_key(&date, |b| b.date).ok()
    }

    /// Sub-series restricted to `range` (inclusive on both ends).
    pub fn slice(&self, range: DateRange) -> Result<Self> {
        let bars: Vec<_> = self.bars.iter().filter(|b| range.contains(b.date)).copied().collect();
        Self::new(self.ticker.clone(), bars)
    }

    /// Sub-series containing exactly the bars dated in `dates`. Every date must exist.
    pub fn select(&self, dates: &[NaiveDate]) -> Result<Self> {
        let bars = dates
            .iter()
            .map(|&d| {
                self.position(d)
                    .map(|i| self.bars[i])
                    .ok_or_else(|| Error::InvalidInput(format!("{}: no bar dated {d}", self.ticker)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.ticker.clone(), bars)
    }

    /// Writes the series in the canonical CSV schema.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        for b in &self.bars {
            w.write_record([
                b.date.format(DATE_FORMAT).to_string(),
                b.open.to_string(),
                b.high.to_string(),
                b.low.to_string(),
                b.close.to_string(),
                b.adj_close.to_string(),
                b.volume.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }
}

/// Inclusive calendar range; either end may be open.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
}

impl DateRange {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start.is_none_or(|s| date >= s) && self.end.is_none_or(|e| date <= e)
    }
}

/// Loads a price file. The ticker is the file stem.
pub fn load_csv(path: impl AsRef<Path>) -> Result<PriceSeries> {
    let path = path.as_ref();
    let ticker = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::InvalidInput(format!("no file stem in {}", path.display())))?
        .to_string();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    file.read_to_string(&mut text).map_err(|e| Error::io(path, e))?;
    parse_csv(&ticker, text.as_bytes())
}

/// Parses CSV content in the canonical schema. Row numbers in errors count
/// data rows from 1 (the header is not counted).
pub fn parse_csv<R: Read>(ticker: &str, reader: R) -> Result<PriceSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut index = [0usize; 7];
    for (slot, name) in index.iter_mut().zip(CSV_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }

    let mut bars = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::MalformedRow {
            row,
            reason: e.to_string(),
        })?;
        let field = |k: usize| record.get(index[k]).unwrap_or("");
        let date = NaiveDate::parse_from_str(field(0), DATE_FORMAT).map_err(|e| Error::MalformedRow {
            row,
            reason: format!("date `{}`: {e}", field(0)),
        })?;
        let mut prices = [0.0; 5];
        for (k, p) in prices.iter_mut().enumerate() {
            let raw = field(k + 1);
            *p = raw.parse::<f64>().map_err(|_| Error::MalformedRow {
                row,
                reason: format!("{} `{raw}` is not a number", CSV_HEADER[k + 1]),
            })?;
        }
        let raw_volume = field(6);
        let volume = parse_volume(raw_volume).ok_or_else(|| Error::MalformedRow {
            row,
            reason: format!("volume `{raw_volume}` is not a non-negative integer"),
        })?;
        bars.push(PriceBar {
            date,
            open: prices[0],
            high: prices[1],
            low: prices[2],
            close: prices[3],
            adj_close: prices[4],
            volume,
        });
    }
    PriceSeries::new(ticker, bars)
}

// Some vendors write volume as "1200.0".
fn parse_volume(raw: &str) -> Option<u64> {
    if let Ok(v) = raw.parse::<u64>() {
        return Some(v);
    }
    let f: f64 = raw.parse().ok()?;
    (f >= 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64).then_some(f as u64)
}

/// Source of price series by ticker and date range.
pub trait Fetcher: Send + Sync {
    fn fetch(&self, ticker: &str, range: DateRange) -> Result<PriceSeries>;
}

/// Reads `<dir>/<ticker>.csv`.
#[derive(Debug, Clone)]
pub struct CsvFetcher {
    dir: PathBuf,
}

impl CsvFetcher {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        CsvFetcher { dir: dir.into() }
    }
}

impl Fetcher for CsvFetcher {
    fn fetch(&self, ticker: &str, range: DateRange) -> Result<PriceSeries> {
        let series = load_csv(self.dir.join(format!("{ticker}.csv")))?;
        series.slice(range)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityConfig {
    /// Robust z-score above which a log return is flagged.
    pub outlier_z: f64,
    /// Calendar-day gap above which a missing-dates entry is reported.
    pub max_gap_days: i64,
}

impl Default for QualityConfig {
    fn default() -> Self {
        QualityConfig {
            outlier_z: 10.0,
            max_gap_days: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DateGap {
    pub after: NaiveDate,
    pub before: NaiveDate,
    pub days: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierFlag {
    pub date: NaiveDate,
    pub field: String,
    pub z_score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub missing_dates: Vec<DateGap>,
    pub malformed_rows: Vec<(usize, String)>,
    pub outlier_flags: Vec<OutlierFlag>,
}

impl QualityReport {
    pub fn is_clean(&self) -> bool {
        self.missing_dates.is_empty() && self.malformed_rows.is_empty() && self.outlier_flags.is_empty()
    }

    /// Rows that violate bar invariants make a series unusable for features.
    pub fn is_rejected(&self) -> bool {
        !self.malformed_rows.is_empty()
    }
}

pub fn validate(series: &PriceSeries) -> QualityReport {
    validate_with(series, &QualityConfig::default())
}

/// Report-only quality check: bar invariant violations, calendar gaps and
/// return outliers under a robust (median/MAD) z-score.
pub fn validate_with(series: &PriceSeries, config: &QualityConfig) -> QualityReport {
    let bars = series.bars();
    let malformed_rows = bars
        .iter()
        .enumerate()
        .filter_map(|(i, b)| b.check().map(|r| (i, r)))
        .collect();

    let missing_dates = bars
        .windows(2)
        .filter_map(|w| {
            let days = (w[1].date - w[0].date).num_days();
            (days > config.max_gap_days).then_some(DateGap {
                after: w[0].date,
                before: w[1].date,
                days,
            })
        })
        .collect();

    let mut returns = Vec::with_capacity(bars.len().saturating_sub(1));
    for w in bars.windows(2) {
        if w[0].adj_close > 0.0 && w[1].adj_close > 0.0 {
            returns.push((w[1].date, (w[1].adj_close / w[0].adj_close).ln()));
        }
    }
    let outlier_flags = robust_outliers(&returns, config.outlier_z);

    QualityReport {
        missing_dates,
        malformed_rows,
        outlier_flags,
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn robust_outliers(returns: &[(NaiveDate, f64)], threshold: f64) -> Vec<OutlierFlag> {
    if returns.len() < 2 {
        return Vec::new();
    }
    let mut values: Vec<f64> = returns.iter().map(|r| r.1).collect();
    let center = median(&mut values);
    let mut deviations: Vec<f64> = returns.iter().map(|r| (r.1 - center).abs()).collect();
    let mean_abs = deviations.iter().sum::<f64>() / deviations.len() as f64;
    // MAD collapses to zero on mostly flat series; fall back to the mean
    // absolute deviation (normal-consistent constant 1.2533).
    let mad = median(&mut deviations);
    let scale = if mad > 0.0 { 1.4826 * mad } else { 1.2533 * mean_abs };
    if scale <= 0.0 || !scale.is_finite() {
        return Vec::new();
    }
    returns
        .iter()
        .filter_map(|&(date, r)| {
            let z = (r - center) / scale;
            (z.abs() > threshold).then(|| OutlierFlag {
                date,
                field: "adj_close".into(),
                z_score: z,
            })
        })
        .collect()
}

/// Daily log returns of the adjusted close, dated by the later bar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub ticker: String,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl ReturnSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn log_returns(series: &PriceSeries) -> Result<ReturnSeries> {
    let bars = series.bars();
    if bars.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: bars.len(),
        });
    }
    if let Some(b) = bars.iter().find(|b| !(b.adj_close > 0.0) || !b.adj_close.is_finite()) {
        return Err(Error::NonPositivePrice(b.date));
    }
    let (dates, values) = bars
        .windows(2)
        .map(|w| (w[1].date, (w[1].adj_close / w[0].adj_close).ln()))
        .unzip();
    Ok(ReturnSeries {
        ticker: series.ticker().to_string(),
        dates,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, DATE_FORMAT).unwrap()
    }

    const THREE_ROWS: &str = "date,open,high,low,close,adj_close,volume\n\
        2020-01-02,10,11,9,10.5,10.5,100\n\
        2020-01-03,10.5,12,10,11,11,200\n\
        2020-01-06,11,11.5,10.2,10.4,10.4,150\n";

    #[test]
    fn loads_well_formed_file() {
        let s = parse_csv("ABC", THREE_ROWS.as_bytes()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.ticker(), "ABC");
        assert!(s.bars().windows(2).all(|w| w[0].date < w[1].date));
        assert_eq!(s.bars()[1].volume, 200);
    }

    #[test]
    fn sorts_out_of_order_rows() {
        let text = "date,open,high,low,close,adj_close,volume\n\
            2020-01-06,11,11.5,10.2,10.4,10.4,150\n\
            2020-01-02,10,11,9,10.5,10.5,100\n\
            2020-01-03,10.5,12,10,11,11,200\n";
        let shuffled = parse_csv("ABC", text.as_bytes()).unwrap();
        let ordered = parse_csv("ABC", THREE_ROWS.as_bytes()).unwrap();
        assert_eq!(shuffled, ordered);
    }

    #[test]
    fn rejects_non_numeric_close_with_row_number() {
        let mut text = String::from("date,open,high,low,close,adj_close,volume\n");
        for i in 1..=8 {
            let close = if i == 7 { "abc".to_string() } else { "10".to_string() };
            text.push_str(&format!("2020-01-{:02},10,10,10,{close},10,1\n", i + 1));
        }
        match parse_csv("X", text.as_bytes()) {
            Err(Error::MalformedRow { row, reason }) => {
                assert_eq!(row, 7);
                assert!(reason.contains("close"), "{reason}");
            }
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_missing_column_and_bad_date() {
        let text = "date,open,high,low,close,volume\n2020-01-02,1,1,1,1,1\n";
        assert!(matches!(
            parse_csv("X", text.as_bytes()),
            Err(Error::MissingColumn(c)) if c == "adj_close"
        ));
        let text = "date,open,high,low,close,adj_close,volume\n01/02/2020,1,1,1,1,1,1\n";
        assert!(matches!(
            parse_csv("X", text.as_bytes()),
            Err(Error::MalformedRow { row: 1, .. })
        ));
    }

    #[test]
    fn rejects_duplicate_dates() {
        let text = "date,open,high,low,close,adj_close,volume\n\
            2020-01-02,1,1,1,1,1,1\n2020-01-02,1,1,1,1,1,1\n";
        assert!(matches!(parse_csv("X", text.as_bytes()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn load_csv_takes_ticker_from_file_stem() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("SPY.csv");
        std::fs::write(&path, THREE_ROWS).unwrap();
        let s = load_csv(&path).unwrap();
        assert_eq!(s.ticker(), "SPY");
        assert!(matches!(load_csv(dir.path().join("nope.csv")), Err(Error::Io { .. })));

        let fetched = CsvFetcher::new(dir.path())
            .fetch(
                "SPY",
                DateRange {
                    start: Some(d("2020-01-03")),
                    end: None,
                },
            )
            .unwrap();
        assert_eq!(fetched.len(), 2);
    }

    #[test]
    fn log_return_examples() {
        let start = d("2020-01-01");
        let flat = PriceSeries::from_closes("F", start, &[100.0, 100.0, 100.0]).unwrap();
        assert_eq!(log_returns(&flat).unwrap().values, vec![0.0, 0.0]);

        let up = PriceSeries::from_closes("U", start, &[100.0, 110.0]).unwrap();
        let r = log_returns(&up).unwrap();
        assert!((r.values[0] - 0.095_310_179_804_324_9).abs() < 1e-12);
        assert_eq!(r.dates, vec![d("2020-01-02")]);

        let zero = PriceSeries::from_closes("Z", start, &[100.0, 0.0]).unwrap();
        assert!(matches!(log_returns(&zero), Err(Error::NonPositivePrice(date)) if date == d("2020-01-02")));

        let single = PriceSeries::from_closes("S", start, &[100.0]).unwrap();
        assert!(log_returns(&single).is_err());
    }

    #[test]
    fn constant_series_is_clean() {
        let s = PriceSeries::from_closes("C", d("2020-01-01"), &[50.0; 40]).unwrap();
        let report = validate(&s);
        assert!(report.is_clean(), "{report:?}");
    }

    #[test]
    fn flags_price_spike() {
        let mut closes: Vec<f64> = (0..60)
            .map(|i| 100.0 * (1.0 + 0.01 * ((i * 7 % 5) as f64 - 2.0)))
            .collect();
        closes[30] *= 10_000.0;
        let s = PriceSeries::from_closes("S", d("2020-01-01"), &closes).unwrap();
        let report = validate(&s);
        let spike_date = s.bars()[30].date;
        assert!(report
            .outlier_flags
            .iter()
            .any(|f| f.date == spike_date && f.z_score > 10.0));
        assert!(!report.is_rejected());

        let mut flat = vec![100.0; 60];
        flat[30] = 1_000_000.0;
        let s = PriceSeries::from_closes("S", d("2020-01-01"), &flat).unwrap();
        assert!(validate(&s).outlier_flags.iter().any(|f| f.date == s.bars()[30].date));
    }

    #[test]
    fn reports_two_week_gap_once() {
        let mut bars: Vec<PriceBar> = (0..10)
            .map(|i| PriceBar::flat(d("2020-01-01") + chrono::Days::new(i), 10.0))
            .collect();
        for i in 0..10 {
            bars.push(PriceBar::flat(d("2020-01-25") + chrono::Days::new(i), 10.0));
        }
        let s = PriceSeries::new("G", bars).unwrap();
        let report = validate(&s);
        assert_eq!(report.missing_dates.len(), 1);
        assert_eq!(report.missing_dates[0].days, 15);
        assert_eq!(validate(&s), report);
    }

    #[test]
    fn weekend_gaps_are_not_reported() {
        let text = "date,open,high,low,close,adj_close,volume\n\
            2020-01-03,1,1,1,1,1,1\n2020-01-06,1,1,1,1,1,1\n";
        assert!(validate(&parse_csv("X", text.as_bytes()).unwrap())
            .missing_dates
            .is_empty());
    }

    #[test]
    fn malformed_bars_reject_series() {
        let mut bar = PriceBar::flat(d("2020-01-01"), 10.0);
        bar.high = 9.0;
        let s = PriceSeries::new("M", vec![bar, PriceBar::flat(d("2020-01-02"), 10.0)]).unwrap();
        let report = validate(&s);
        assert_eq!(report.malformed_rows.len(), 1);
        assert_eq!(report.malformed_rows[0].0, 0);
        assert!(report.is_rejected());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn csv_round_trip(
                closes in proptest::collection::vec(0.01f64..1e6, 1..40),
                volume in 0u64..1_000_000_000,
            ) {
                let start = d("2001-03-05");
                let bars: Vec<PriceBar> = closes.iter().enumerate().map(|(i, &c)| PriceBar {
                    date: start + chrono::Days::new(i as u64 * 3),
                    open: c * 1.01,
                    high: c * 1.05,
                    low: c * 0.95,
                    close: c,
                    adj_close: c * 0.8,
                    volume,
                }).collect();
                let series = PriceSeries::new("RT", bars).unwrap();
                let mut buf = Vec::new();
                series.write_csv(&mut buf).unwrap();
                let back = parse_csv("RT", buf.as_slice()).unwrap();
                prop_assert_eq!(back, series);
            }

            #[test]
            fn geometric_sequence_has_constant_log_return(
                start in 0.5f64..500.0,
                ratio in 0.5f64..2.0,
                n in 2usize..60,
            ) {
                let closes: Vec<f64> = (0..n).map(|i| start * ratio.powi(i as i32)).collect();
                let s = PriceSeries::from_closes("G", d("2020-01-01"), &closes).unwrap();
                let r = log_returns(&s).unwrap();
                prop_assert_eq!(r.len(), n - 1);
                for v in r.values {
                    prop_assert!((v - ratio.ln()).abs() < 1e-9);
                }
            }
        }
    }
}
