//! Augmented Dickey-Fuller unit-root test.
//!
//! The test regression is
//!
//! ```text
//! dx[t] = mu + gamma*t + alpha*x[t-1] + sum_{j=1..p} beta_j*dx[t-j] + e[t]
//! ```
//!
//! with `H0: alpha = 0` (unit root) against `alpha < 0` (stationary). The lag
//! count `p` is chosen by AIC (`T ln(SSR/T) + 2k`) over `0..=max_lag` on a
//! common sample, then the chosen regression is refit on all available
//! observations. P-values interpolate the Dickey-Fuller critical-value table.

use serde::{Deserialize, Serialize};

use crate::linalg::{backward_solve, cholesky, forward_solve, inverse_diag, Square};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deterministic {
    Constant,
    ConstantTrend,
}

impl Deterministic {
    fn terms(self) -> usize {
        match self {
            Deterministic::Constant => 1,
            Deterministic::ConstantTrend => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagRounding {
    #[default]
    Floor,
    Ceil,
}

/// Schwert's rule `floor(12 (T/100)^(1/4))`.
pub fn schwert_max_lag(sample_size: usize) -> usize {
    schwert_max_lag_with(sample_size, LagRounding::Floor, 1.0)
}

/// Schwert's rule with explicit rounding and a multiplier applied before rounding.
pub fn schwert_max_lag_with(sample_size: usize, rounding: LagRounding, multiplier: f64) -> usize {
    let raw = multiplier * 12.0 * (sample_size as f64 / 100.0).sqrt().sqrt();
    match rounding {
        LagRounding::Floor => raw.floor() as usize,
        LagRounding::Ceil => raw.ceil() as usize,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdfConfig {
    pub deterministic: Deterministic,
    /// Fixed maximum lag; `None` derives it from the Schwert rule.
    pub max_lag: Option<usize>,
    pub rounding: LagRounding,
    /// Scales the Schwert value (e.g. 2.0 doubles the maximum lag).
    pub lag_multiplier: f64,
}

impl Default for AdfConfig {
    fn default() -> Self {
        AdfConfig {
            deterministic: Deterministic::ConstantTrend,
            max_lag: None,
            rounding: LagRounding::Floor,
            lag_multiplier: 1.0,
        }
    }
}

impl AdfConfig {
    pub fn resolve_max_lag(&self, sample_size: usize) -> usize {
        self.max_lag
            .unwrap_or_else(|| schwert_max_lag_with(sample_size, self.rounding, self.lag_multiplier))
    }
}

pub const SIGNIFICANCE_LEVELS: [f64; 3] = [0.01, 0.05, 0.10];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub deterministic: Deterministic,
    /// t-statistic of the lagged level coefficient.
    pub t_stat: f64,
    pub lags_used: usize,
    pub max_lag: usize,
    /// Observations in the final regression.
    pub nobs: usize,
    pub aic: f64,
    pub p_value: f64,
    /// Critical values at [`SIGNIFICANCE_LEVELS`].
    pub critical_values: [f64; 3],
    /// Levels at which the unit-root null is rejected.
    pub reject_at: Vec<f64>,
}

impl AdfResult {
    pub fn rejects_at(&self, level: f64) -> bool {
        self.reject_at.iter().any(|&l| (l - level).abs() < 1e-12)
    }
}

/// ADF test with explicit maximum lag.
pub fn adf_test(x: &[f64], max_lag: usize, deterministic: Deterministic) -> Result<AdfResult> {
    adf_test_with(
        x,
        &AdfConfig {
            deterministic,
            max_lag: Some(max_lag),
            ..AdfConfig::default()
        },
    )
}

pub fn adf_test_with(x: &[f64], config: &AdfConfig) -> Result<AdfResult> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("series contains non-finite values".into()));
    }
    let max_lag = config.resolve_max_lag(x.len());
    let det = config.deterministic;
    let profile = aic_profile(x, max_lag, det)?;
    let (lags_used, _) = profile.iter().enumerate().fold(
        (0, f64::INFINITY),
        |best, (p, &a)| if a < best.1 { (p, a) } else { best },
    );

    let fit = fit_regression(x, lags_used, det, x.len() - 1 - lags_used)?;
    let nobs = fit.nobs;
    let critical_values = SIGNIFICANCE_LEVELS.map(|l| critical_value(det, nobs, l));
    let reject_at = SIGNIFICANCE_LEVELS
        .iter()
        .zip(critical_values)
        .filter(|(_, cv)| fit.t_stat < *cv)
        .map(|(l, _)| *l)
        .collect();
    Ok(AdfResult {
        deterministic: det,
        t_stat: fit.t_stat,
        lags_used,
        max_lag,
        nobs,
        aic: fit.aic,
        p_value: p_value(det, nobs, fit.t_stat),
        critical_values,
        reject_at,
    })
}

/// AIC for each lag count `0..=max_lag`, all evaluated on the common sample
/// that drops the first `max_lag + 1` observations.
pub fn aic_profile(x: &[f64], max_lag: usize, det: Deterministic) -> Result<Vec<f64>> {
    let n = x.len();
    let k_max = det.terms() + 1 + max_lag;
    let needed = max_lag + k_max + 2;
    if n < needed {
        return Err(Error::InsufficientData { needed, got: n });
    }
    let nobs = n - 1 - max_lag;
    let design = Design::new(x, max_lag, det, nobs);
    let (gram, xty, yty) = design.normal_equations(k_max);
    let l = factor(&gram, det)?;
    let z = forward_solve(&l, &xty, k_max);
    let mut explained = 0.0;
    let mut aic = Vec::with_capacity(max_lag + 1);
    for (i, zi) in z.iter().enumerate() {
        explained += zi * zi;
        let k = i + 1;
        if k > det.terms() {
            let ssr = (yty - explained).max(f64::MIN_POSITIVE);
            aic.push(nobs as f64 * (ssr / nobs as f64).ln() + 2.0 * k as f64);
        }
    }
    Ok(aic)
}

struct Fit {
    t_stat: f64,
    aic: f64,
    nobs: usize,
}

/// Regression rows for the last `nobs` differences with `lags` lagged
/// differences; columns are deterministic terms, `x[t-1]`, then lags.
struct Design<'a> {
    x: &'a [f64],
    lags: usize,
    det: Deterministic,
    first: usize,
    nobs: usize,
}

impl<'a> Design<'a> {
    fn new(x: &'a [f64], lags: usize, det: Deterministic, nobs: usize) -> Self {
        Design {
            x,
            lags,
            det,
            first: x.len() - nobs,
            nobs,
        }
    }

    fn row(&self, t: usize, out: &mut [f64]) -> f64 {
        let x = self.x;
        let mut c = 0;
        out[c] = 1.0;
        c += 1;
        if self.det == Deterministic::ConstantTrend {
            out[c] = t as f64 / x.len() as f64;
            c += 1;
        }
        out[c] = x[t - 1];
        c += 1;
        for j in 1..=self.lags {
            out[c] = x[t - j] - x[t - j - 1];
            c += 1;
        }
        x[t] - x[t - 1]
    }

    fn normal_equations(&self, k: usize) -> (Square, Vec<f64>, f64) {
        let mut gram = Square::zeros(k);
        let mut xty = vec![0.0; k];
        let mut yty = 0.0;
        let mut row = vec![0.0; k];
        for t in self.first..self.first + self.nobs {
            let y = self.row(t, &mut row);
            yty += y * y;
            for i in 0..k {
                xty[i] += row[i] * y;
                for j in 0..=i {
                    gram.data[i * k + j] += row[i] * row[j];
                }
            }
        }
        for i in 0..k {
            for j in 0..i {
                gram.data[j * k + i] = gram.data[i * k + j];
            }
        }
        (gram, xty, yty)
    }
}

fn factor(gram: &Square, det: Deterministic) -> Result<Square> {
    cholesky(gram, 1e-11).map_err(|col| {
        let what = match col.cmp(&det.terms()) {
            std::cmp::Ordering::Less => "deterministic terms are collinear".to_string(),
            std::cmp::Ordering::Equal => {
                "lagged level is collinear with the deterministic terms (constant series?)".to_string()
            }
            std::cmp::Ordering::Greater => format!("lagged difference {} is degenerate", col - det.terms()),
        };
        Error::Singular(what)
    })
}

fn fit_regression(x: &[f64], lags: usize, det: Deterministic, nobs: usize) -> Result<Fit> {
    let k = det.terms() + 1 + lags;
    if nobs <= k {
        return Err(Error::InsufficientData {
            needed: k + 1,
            got: nobs,
        });
    }
    let design = Design::new(x, lags, det, nobs);
    let (gram, xty, _) = design.normal_equations(k);
    let l = factor(&gram, det)?;
    let beta = backward_solve(&l, &forward_solve(&l, &xty, k), k);
    let mut row = vec![0.0; k];
    let mut ssr = 0.0;
    for t in design.first..design.first + nobs {
        let y = design.row(t, &mut row);
        let fitted: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
        ssr += (y - fitted).powi(2);
    }
    let alpha_idx = det.terms();
    let sigma2 = ssr / (nobs - k) as f64;
    let se = (sigma2 * inverse_diag(&l, alpha_idx, k)).sqrt();
    if !(se > 0.0) {
        return Err(Error::Singular("zero residual variance".into()));
    }
    Ok(Fit {
        t_stat: beta[alpha_idx] / se,
        aic: nobs as f64 * (ssr.max(f64::MIN_POSITIVE) / nobs as f64).ln() + 2.0 * k as f64,
        nobs,
    })
}

// Dickey-Fuller t-statistic quantiles (Fuller 1976; Hamilton 1994, Table B.6).
const QUANTILES: [f64; 8] = [0.01, 0.025, 0.05, 0.10, 0.90, 0.95, 0.975, 0.99];
const SAMPLE_SIZES: [f64; 5] = [25.0, 50.0, 100.0, 250.0, 500.0];

// Published table entries; -3.14 is a quantile, not pi.
#[allow(clippy::approx_constant)]
const TABLE_CONSTANT: [[f64; 8]; 6] = [
    [-3.75, -3.33, -3.00, -2.63, -0.37, 0.00, 0.34, 0.72],
    [-3.58, -3.22, -2.93, -2.60, -0.40, -0.03, 0.29, 0.66],
    [-3.51, -3.17, -2.89, -2.58, -0.42, -0.05, 0.26, 0.63],
    [-3.46, -3.14, -2.88, -2.57, -0.42, -0.06, 0.24, 0.62],
    [-3.44, -3.13, -2.87, -2.57, -0.43, -0.07, 0.24, 0.61],
    [-3.43, -3.12, -2.86, -2.57, -0.44, -0.07, 0.23, 0.60],
];

const TABLE_TREND: [[f64; 8]; 6] = [
    [-4.38, -3.95, -3.60, -3.24, -1.14, -0.80, -0.50, -0.15],
    [-4.15, -3.80, -3.50, -3.18, -1.19, -0.87, -0.58, -0.24],
    [-4.04, -3.73, -3.45, -3.15, -1.22, -0.90, -0.62, -0.28],
    [-3.99, -3.69, -3.43, -3.13, -1.23, -0.92, -0.64, -0.31],
    [-3.98, -3.68, -3.42, -3.13, -1.24, -0.93, -0.65, -0.32],
    [-3.96, -3.66, -3.41, -3.12, -1.25, -0.94, -0.66, -0.33],
];

/// Quantile row for sample size `nobs`: linear in T between tabulated sizes,
/// linear in 1/T between 500 and the asymptotic row.
fn quantile_row(det: Deterministic, nobs: usize) -> [f64; 8] {
    let table = match det {
        Deterministic::Constant => &TABLE_CONSTANT,
        Deterministic::ConstantTrend => &TABLE_TREND,
    };
    let t = nobs as f64;
    let lerp = |a: &[f64; 8], b: &[f64; 8], w: f64| std::array::from_fn(|i| a[i] + w * (b[i] - a[i]));
    if t <= SAMPLE_SIZES[0] {
        return table[0];
    }
    for i in 0..SAMPLE_SIZES.len() - 1 {
        let (lo, hi) = (SAMPLE_SIZES[i], SAMPLE_SIZES[i + 1]);
        if t <= hi {
            return lerp(&table[i], &table[i + 1], (t - lo) / (hi - lo));
        }
    }
    let last = SAMPLE_SIZES[SAMPLE_SIZES.len() - 1];
    lerp(&table[4], &table[5], 1.0 - last / t)
}

/// Critical value at a tabulated lower-tail level.
pub fn critical_value(det: Deterministic, nobs: usize, level: f64) -> f64 {
    let row = quantile_row(det, nobs);
    let i = QUANTILES
        .iter()
        .position(|q| (q - level).abs() < 1e-12)
        .unwrap_or_else(|| panic!("level {level} is not tabulated"));
    row[i]
}

/// Lower-tail probability of `stat`, interpolated across the quantile table
/// and linearly extrapolated (clamped to `[0, 1]`) beyond it.
pub fn p_value(det: Deterministic, nobs: usize, stat: f64) -> f64 {
    let row = quantile_row(det, nobs);
    let seg = if stat <= row[0] {
        0
    } else if stat >= row[7] {
        6
    } else {
        (0..7).find(|&i| stat <= row[i + 1]).unwrap()
    };
    let (s0, s1) = (row[seg], row[seg + 1]);
    let (p0, p1) = (QUANTILES[seg], QUANTILES[seg + 1]);
    (p0 + (stat - s0) * (p1 - p0) / (s1 - s0)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate;

    /// Plain OLS via Gauss-Jordan on the normal equations, built from an
    /// explicitly materialized design matrix.
    fn naive_t_stat(x: &[f64], lags: usize, trend: bool) -> f64 {
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for t in lags + 1..x.len() {
            let mut r = vec![1.0];
            if trend {
                r.push(t as f64);
            }
            r.push(x[t - 1]);
            for j in 1..=lags {
                r.push(x[t - j] - x[t - j - 1]);
            }
            rows.push(r);
            ys.push(x[t] - x[t - 1]);
        }
        let k = rows[0].len();
        let n = rows.len();
        // [X'X | I | X'y]
        let mut a = vec![vec![0.0; 2 * k + 1]; k];
        for (r, y) in rows.iter().zip(&ys) {
            for i in 0..k {
                for j in 0..k {
                    a[i][j] += r[i] * r[j];
                }
                a[i][2 * k] += r[i] * y;
            }
        }
        for (i, row) in a.iter_mut().enumerate() {
            row[k + i] = 1.0;
        }
        for c in 0..k {
            let p = (c..k).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, p);
            let piv = a[c][c];
            for v in a[c].iter_mut() {
                *v /= piv;
            }
            for r in 0..k {
                if r != c {
                    let f = a[r][c];
                    let src = a[c].clone();
                    for (v, s) in a[r].iter_mut().zip(src) {
                        *v -= f * s;
                    }
                }
            }
        }
        let beta: Vec<f64> = (0..k).map(|i| a[i][2 * k]).collect();
        let ssr: f64 = rows
            .iter()
            .zip(&ys)
            .map(|(r, y)| (y - r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>()).powi(2))
            .sum();
        let idx = if trend { 2 } else { 1 };
        let var = ssr / (n - k) as f64 * a[idx][k + idx];
        beta[idx] / var.sqrt()
    }

    #[test]
    fn schwert_examples() {
        assert_eq!(schwert_max_lag(100), 12);
        assert_eq!(schwert_max_lag(1600), 24);
        assert_eq!(schwert_max_lag(2520), 26);
        assert_eq!(schwert_max_lag_with(2520, LagRounding::Ceil, 1.0), 27);
        assert_eq!(schwert_max_lag_with(2520, LagRounding::Floor, 2.0), 53);
    }

    #[test]
    fn schwert_is_monotone() {
        let mut prev = 0;
        for t in 1..20_000 {
            let m = schwert_max_lag(t);
            assert!(m >= prev);
            prev = m;
        }
    }

    #[test]
    fn t_stat_matches_naive_ols() {
        let x = simulate::ar1(400, 0.8, 5);
        for det in [Deterministic::Constant, Deterministic::ConstantTrend] {
            for lags in [0, 1, 4] {
                let fit = fit_regression(&x, lags, det, x.len() - 1 - lags).unwrap();
                let naive = naive_t_stat(&x, lags, det == Deterministic::ConstantTrend);
                assert!(
                    (fit.t_stat - naive).abs() < 1e-8 * naive.abs(),
                    "{det:?} lags={lags}: {} vs {naive}",
                    fit.t_stat
                );
            }
        }
    }

    #[test]
    fn iid_returns_reject_strongly() {
        let x = simulate::iid_normal(2520, 42);
        let r = adf_test_with(&x, &AdfConfig::default()).unwrap();
        assert_eq!(r.max_lag, 26);
        assert!(r.lags_used <= 26);
        assert!(r.t_stat < -10.0, "{r:?}");
        assert!(r.p_value < 0.01);
        assert_eq!(r.reject_at, vec![0.01, 0.05, 0.10]);
    }

    #[test]
    fn constant_series_is_singular() {
        let x = vec![0.5; 300];
        assert!(matches!(
            adf_test(&x, 5, Deterministic::Constant),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn short_series_is_rejected() {
        let x = simulate::iid_normal(10, 1);
        assert!(matches!(
            adf_test(&x, 8, Deterministic::ConstantTrend),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn p_value_is_monotone_and_hits_table_points() {
        for det in [Deterministic::Constant, Deterministic::ConstantTrend] {
            for nobs in [20, 60, 300, 2500, 100_000] {
                let mut prev = 0.0;
                let mut s = -8.0;
                while s < 3.0 {
                    let p = p_value(det, nobs, s);
                    assert!((0.0..=1.0).contains(&p));
                    assert!(p >= prev - 1e-15);
                    prev = p;
                    s += 0.01;
                }
            }
            for level in SIGNIFICANCE_LEVELS {
                let cv = critical_value(det, 250, level);
                assert!((p_value(det, 250, cv) - level).abs() < 1e-12);
            }
        }
        assert_eq!(critical_value(Deterministic::Constant, 100, 0.05), -2.89);
        assert_eq!(critical_value(Deterministic::ConstantTrend, 500, 0.01), -3.98);
    }

    #[test]
    fn invariant_to_return_shift_with_constant() {
        let x = simulate::ar1(800, 0.3, 9);
        let shifted: Vec<f64> = x.iter().map(|v| v + 3.7).collect();
        for det in [Deterministic::Constant, Deterministic::ConstantTrend] {
            let a = adf_test(&x, 8, det).unwrap();
            let b = adf_test(&shifted, 8, det).unwrap();
            assert_eq!(a.lags_used, b.lags_used);
            assert!((a.t_stat - b.t_stat).abs() < 1e-8 * a.t_stat.abs());
        }
    }

    #[test]
    fn larger_max_lag_never_worsens_min_aic() {
        let x = simulate::ar1(600, 0.6, 3);
        let small = 4;
        let large = 12;
        let profile = aic_profile(&x, large, Deterministic::ConstantTrend).unwrap();
        let min_small = profile[..=small].iter().copied().fold(f64::INFINITY, f64::min);
        let min_large = profile.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min_large <= min_small);
        let r = adf_test(&x, large, Deterministic::ConstantTrend).unwrap();
        assert!(r.lags_used <= large);
        assert_eq!(profile[r.lags_used], min_large);
    }

    #[test]
    fn selects_true_lag_order_for_ar2_differences() {
        // dx follows AR(2) with a unit root in levels; AIC should keep >= 2 lags.
        let e = simulate::iid_normal(3000, 17);
        let mut dx = vec![0.0; e.len()];
        for t in 2..e.len() {
            dx[t] = 0.5 * dx[t - 1] - 0.3 * dx[t - 2] + e[t];
        }
        let mut level = 0.0;
        let x: Vec<f64> = dx
            .iter()
            .map(|d| {
                level += d;
                level
            })
            .collect();
        let r = adf_test(&x, 12, Deterministic::Constant).unwrap();
        assert!(r.lags_used >= 2, "{r:?}");
    }
}
