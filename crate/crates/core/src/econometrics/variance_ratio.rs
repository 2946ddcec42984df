//! Lo-MacKinlay (1988) variance-ratio test.
//!
//! With sample mean `mu`, the ratio compares the overlapping `k`-period sum
//! variance against `k` times the one-period variance, both with the
//! unbiased corrections of Lo and MacKinlay:
//!
//! ```text
//! s2_a = sum (x_t - mu)^2 / (T - 1)
//! s2_c = sum_{t >= k} (x_t + ... + x_{t-k+1} - k mu)^2 / m,   m = k (T-k+1) (1 - k/T)
//! VR(k) = s2_c / s2_a
//! ```
//!
//! The heteroskedasticity-robust statistic is the standard Lo-MacKinlay
//! estimator
//!
//! ```text
//! delta_j = sum_{t > j} (x_t - mu)^2 (x_{t-j} - mu)^2 / [sum_t (x_t - mu)^2]^2
//! phi*(k) = sum_{j=1}^{k-1} [2 (k-j) / k]^2 delta_j
//! M2(k)   = (VR(k) - 1) / sqrt(phi*(k))
//! ```
//!
//! which is asymptotically standard normal under the uncorrelated-increments null.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::{Error, Result};

/// Horizons (in trading days) tested by default.
pub const DEFAULT_K_SET: [usize; 4] = [2, 5, 10, 30];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VrResult {
    pub k: usize,
    pub vr: f64,
    pub m2: f64,
    pub phi_star: f64,
    /// Two-sided standard normal p-value of `m2`.
    pub p_value: f64,
}

fn check(x: &[f64], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidInput("horizon k must be positive".into()));
    }
    if x.len() < 2 * k {
        return Err(Error::InsufficientData {
            needed: 2 * k,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("series contains non-finite values".into()));
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Overlapping variance ratio `VR(k)`; exactly 1 for `k = 1`.
pub fn variance_ratio(x: &[f64], k: usize) -> Result<f64> {
    check(x, k)?;
    let mu = mean(x);
    let dev2: f64 = x.iter().map(|v| (v - mu).powi(2)).sum();
    // Relative test: rounding in the mean leaves a constant series with a
    // tiny nonzero spread.
    let scale: f64 = x.iter().map(|v| v * v).sum();
    if !(dev2 > 1e-24 * scale) {
        return Err(Error::InvalidInput("zero single-period variance".into()));
    }
    if k == 1 {
        return Ok(1.0);
    }
    let t = x.len();
    let var_a = dev2 / (t - 1) as f64;

    let kmu = k as f64 * mu;
    let mut window: f64 = x[..k].iter().sum();
    let mut sum_sq = (window - kmu).powi(2);
    for i in k..t {
        window += x[i] - x[i - k];
        sum_sq += (window - kmu).powi(2);
    }
    // k (T-k+1) (1 - k/T) written to stay exact in integers as far as possible.
    let m = (k * (t - k + 1) * (t - k)) as f64 / t as f64;
    Ok(sum_sq / m / var_a)
}

/// Robust `M2(k)` test; requires `k >= 2`.
pub fn vr_test_m2(x: &[f64], k: usize) -> Result<VrResult> {
    if k < 2 {
        return Err(Error::InvalidInput("M2 needs a horizon k >= 2".into()));
    }
    let vr = variance_ratio(x, k)?;
    let mu = mean(x);
    let dev2: Vec<f64> = x.iter().map(|v| (v - mu).powi(2)).collect();
    let total: f64 = dev2.iter().sum();
    let denom = total * total;
    let phi_star: f64 = (1..k)
        .map(|j| {
            let delta: f64 = dev2[j..].iter().zip(&dev2).map(|(a, b)| a * b).sum::<f64>() / denom;
            let w = 2.0 * (k - j) as f64 / k as f64;
            w * w * delta
        })
        .sum();
    if !(phi_star > 0.0) {
        return Err(Error::InvalidInput("degenerate robust variance".into()));
    }
    let m2 = (vr - 1.0) / phi_star.sqrt();
    Ok(VrResult {
        k,
        vr,
        m2,
        phi_star,
        p_value: erfc(m2.abs() / std::f64::consts::SQRT_2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate;

    /// Direct evaluation from the definition: explicit k-sums, no sliding window.
    fn vr_oracle(x: &[f64], k: usize) -> f64 {
        let t = x.len() as f64;
        let mu = x.iter().sum::<f64>() / t;
        let var_a = x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (t - 1.0);
        let sums: Vec<f64> = (k - 1..x.len()).map(|i| x[i + 1 - k..=i].iter().sum()).collect();
        let kf = k as f64;
        let m = kf * (t - kf + 1.0) * (1.0 - kf / t);
        let var_c = sums.iter().map(|s| (s - kf * mu).powi(2)).sum::<f64>() / m;
        var_c / var_a
    }

    #[test]
    fn matches_definition() {
        let x = simulate::iid_normal(500, 4);
        for k in [2, 3, 7, 30] {
            let a = variance_ratio(&x, k).unwrap();
            assert!((a - vr_oracle(&x, k)).abs() < 1e-10);
        }
    }

    #[test]
    fn k_one_is_exactly_one() {
        let x = simulate::iid_normal(101, 2);
        assert_eq!(variance_ratio(&x, 1).unwrap(), 1.0);
    }

    #[test]
    fn iid_series_is_near_one() {
        let x = simulate::iid_normal(50_000, 8);
        for k in DEFAULT_K_SET {
            let vr = variance_ratio(&x, k).unwrap();
            assert!((vr - 1.0).abs() < 0.05, "k={k} vr={vr}");
        }
    }

    #[test]
    fn ar1_closed_form_at_two() {
        // VR(2) = 1 + rho_1.
        let x = simulate::ar1(10_000, 0.5, 21);
        let vr = variance_ratio(&x, 2).unwrap();
        assert!((vr - 1.5).abs() < 0.05, "{vr}");
    }

    #[test]
    fn alternating_series_collapses() {
        let x: Vec<f64> = (0..400).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let r = vr_test_m2(&x, 2).unwrap();
        assert!(r.vr < 0.01, "{r:?}");
        assert!(r.m2 < -10.0);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn scale_invariance() {
        let x = simulate::ar1(1000, 0.1, 3);
        let scaled: Vec<f64> = x.iter().map(|v| v * 37.5).collect();
        for k in [2, 10] {
            let a = vr_test_m2(&x, k).unwrap();
            let b = vr_test_m2(&scaled, k).unwrap();
            assert!((a.vr - b.vr).abs() < 1e-12);
            assert!((a.m2 - b.m2).abs() < 1e-9);
        }
    }

    #[test]
    fn p_value_is_two_sided_normal() {
        let x = simulate::iid_normal(300, 5);
        let r = vr_test_m2(&x, 5).unwrap();
        use statrs::distribution::{ContinuousCDF, Normal};
        let phi = Normal::new(0.0, 1.0).unwrap().cdf(r.m2.abs());
        assert!((r.p_value - 2.0 * (1.0 - phi)).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(variance_ratio(&[1.0, 2.0, 3.0], 2).is_err());
        assert!(variance_ratio(&[0.3; 20], 2).is_err());
        assert!(vr_test_m2(&simulate::iid_normal(20, 1), 1).is_err());
    }
}
