//! Shared fixtures for the pipeline benchmarks.

use chrono::NaiveDate;
use emhlab::classifiers::Dataset;
use emhlab::indicators::{build_feature_table, FeatureMode, FeatureTable};
use emhlab::simulate::gbm_series;
use emhlab::PriceSeries;

/// Ten years of daily bars from a seeded geometric random walk.
pub fn decade(seed: u64) -> PriceSeries {
    let start = NaiveDate::from_ymd_opt(2008, 1, 2).expect("valid date");
    gbm_series("BENCH", start, 2520, 100.0, 0.0002, 0.012, seed)
}

pub fn table(series: &PriceSeries, mode: FeatureMode) -> FeatureTable {
    build_feature_table(series, mode).expect("a decade of bars has enough history")
}

/// A default-size training window: the first 250 rows of the table.
pub fn window(table: &FeatureTable) -> Dataset {
    table.dataset(0..250)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_expected_shape() {
        let s = decade(1);
        assert_eq!(s.len(), 2520);
        let t = table(&s, FeatureMode::Trend);
        assert!(t.len() > 2400);
        assert_eq!(window(&t).len(), 250);
    }
}
