//! Stationarity and random-walk tests on return series.
//!
//! - [`adf`]: Augmented Dickey-Fuller with AIC lag selection below Schwert's
//!   maximum lag and table-interpolated p-values.
//! - [`variance_ratio`]: Lo-MacKinlay (1988) overlapping variance ratio and
//!   its heteroskedasticity-robust `M2` statistic.
//! - [`batch`]: both tests over many securities.

pub mod adf;
pub mod batch;
pub mod variance_ratio;

pub use adf::{adf_test, adf_test_with, schwert_max_lag, AdfConfig, AdfResult, Deterministic, LagRounding};
pub use batch::{run_batch, BatchConfig, BatchTestReport, SecurityTests, TestOutcome};
pub use variance_ratio::{variance_ratio, vr_test_m2, VrResult, DEFAULT_K_SET};
