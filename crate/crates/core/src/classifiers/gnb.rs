//! Gaussian naive Bayes with maximum-likelihood class moments.

use serde::{Deserialize, Serialize};

use super::{Dataset, FitDiagnostics, Fitted, Label, ModelSpec, TrainedModel};
use crate::{Error, Result};

/// Added to every variance, relative to the largest feature variance.
pub const VAR_SMOOTHING: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// Indexed by `Label::as_u8`.
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
}

impl GaussianNb {
    pub fn fit(data: &Dataset) -> Result<Self> {
        if !data.has_both_classes() {
            return Err(Error::SingleClass);
        }
        let d = data.n_features();
        let mut counts = [0usize; 2];
        let mut means = [vec![0.0; d], vec![0.0; d]];
        for (i, label) in data.labels().iter().enumerate() {
            let c = label.as_u8() as usize;
            counts[c] += 1;
            for (m, v) in means[c].iter_mut().zip(data.row(i)) {
                *m += v;
            }
        }
        for c in 0..2 {
            means[c].iter_mut().for_each(|m| *m /= counts[c] as f64);
        }
        let mut variances = [vec![0.0; d], vec![0.0; d]];
        for (i, label) in data.labels().iter().enumerate() {
            let c = label.as_u8() as usize;
            for ((s, v), m) in variances[c].iter_mut().zip(data.row(i)).zip(&means[c]) {
                *s += (v - m).powi(2);
            }
        }
        for c in 0..2 {
            variances[c].iter_mut().for_each(|s| *s /= counts[c] as f64);
        }

        // Floor by a fraction of the largest overall feature variance.
        let n = data.len() as f64;
        let mut max_var: f64 = 0.0;
        for j in 0..d {
            let mu = (0..data.len()).map(|i| data.row(i)[j]).sum::<f64>() / n;
            let var = (0..data.len()).map(|i| (data.row(i)[j] - mu).powi(2)).sum::<f64>() / n;
            max_var = max_var.max(var);
        }
        let eps = VAR_SMOOTHING * if max_var > 0.0 { max_var } else { 1.0 };
        for v in variances.iter_mut().flatten() {
            *v += eps;
        }
        Ok(GaussianNb {
            priors: [counts[0] as f64 / n, counts[1] as f64 / n],
            means,
            variances,
        })
    }

    fn log_joint(&self, x: &[f64], c: usize) -> f64 {
        let ll: f64 = x
            .iter()
            .zip(&self.means[c])
            .zip(&self.variances[c])
            .map(|((v, m), s)| -0.5 * ((2.0 * std::f64::consts::PI * s).ln() + (v - m).powi(2) / s))
            .sum();
        self.priors[c].ln() + ll
    }

    /// Posterior probabilities `[P(down | x), P(up | x)]`.
    pub fn posterior(&self, x: &[f64]) -> [f64; 2] {
        let a = self.log_joint(x, 0);
        let b = self.log_joint(x, 1);
        let m = a.max(b);
        let (ea, eb) = ((a - m).exp(), (b - m).exp());
        [ea / (ea + eb), eb / (ea + eb)]
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        Label::from_up(self.log_joint(x, 1) >= self.log_joint(x, 0))
    }
}

pub fn fit_gnb(data: &Dataset) -> Result<TrainedModel> {
    if !data.has_both_classes() {
        return Ok(TrainedModel::constant(ModelSpec::GaussianNb, data));
    }
    let model = GaussianNb::fit(data)?;
    Ok(TrainedModel::new(
        ModelSpec::GaussianNb,
        data,
        Fitted::GaussianNb(model),
        FitDiagnostics {
            converged: true,
            iterations: 1,
            warning: None,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate;
    use proptest::prelude::*;

    #[test]
    fn posterior_matches_bayes_rule_with_known_parameters() {
        // Up: N(1, 1) x N(0, 4); down: N(-1, 1) x N(0, 4); priors 0.3 / 0.7.
        let model = GaussianNb {
            priors: [0.7, 0.3],
            means: [vec![-1.0, 0.0], vec![1.0, 0.0]],
            variances: [vec![1.0, 4.0], vec![1.0, 4.0]],
        };
        let x = [0.4, 1.7];
        let pdf =
            |v: f64, m: f64, s: f64| (-(v - m) * (v - m) / (2.0 * s)).exp() / (2.0 * std::f64::consts::PI * s).sqrt();
        let up = 0.3 * pdf(0.4, 1.0, 1.0) * pdf(1.7, 0.0, 4.0);
        let down = 0.7 * pdf(0.4, -1.0, 1.0) * pdf(1.7, 0.0, 4.0);
        let p = model.posterior(&x);
        assert!((p[1] - up / (up + down)).abs() < 1e-12);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn recovers_moments() {
        let z = simulate::iid_normal(20_000, 9);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for (i, v) in z.iter().enumerate() {
            let up = i % 2 == 0;
            rows.push(vec![if up { 2.0 + 0.5 * v } else { -1.0 + 1.5 * v }]);
            y.push(Label::from_up(up));
        }
        let m = GaussianNb::fit(&Dataset::from_rows(&rows, y).unwrap()).unwrap();
        assert!((m.means[1][0] - 2.0).abs() < 0.02);
        assert!((m.variances[1][0] - 0.25).abs() < 0.01);
        assert!((m.means[0][0] + 1.0).abs() < 0.05);
        assert!((m.variances[0][0] - 2.25).abs() < 0.1);
        assert!((m.priors[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_feature_is_safe() {
        let rows = vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 5.0], vec![1.0, 6.0]];
        let y = vec![Label::Down, Label::Down, Label::Up, Label::Up];
        let m = GaussianNb::fit(&Dataset::from_rows(&rows, y).unwrap()).unwrap();
        assert_eq!(m.predict(&[1.0, 5.5]), Label::Up);
        assert!(m.posterior(&[1.0, 0.2]).iter().all(|p| p.is_finite()));
    }

    #[test]
    fn symmetric_classes_tie_to_up() {
        let m = GaussianNb {
            priors: [0.5, 0.5],
            means: [vec![0.0], vec![2.0]],
            variances: [vec![1.0], vec![1.0]],
        };
        assert_eq!(m.predict(&[1.0]), Label::Up);
        assert!((m.posterior(&[1.0])[1] - 0.5).abs() < 1e-15);
        let flipped = GaussianNb {
            means: [vec![2.0], vec![0.0]],
            ..m.clone()
        };
        assert_eq!(flipped.predict(&[1.0]), Label::Up);
        assert_eq!(m.predict(&[0.0]), Label::Down);
    }

    #[test]
    fn invariant_to_row_order() {
        let z = simulate::iid_normal(3 * 80, 14);
        let rows: Vec<Vec<f64>> = z.chunks(3).map(<[f64]>::to_vec).collect();
        let y: Vec<Label> = rows.iter().map(|r| Label::from_up(r[0] + r[2] > 0.0)).collect();
        let a = GaussianNb::fit(&Dataset::from_rows(&rows, y.clone()).unwrap()).unwrap();
        let b = GaussianNb::fit(
            &Dataset::from_rows(
                &rows.iter().rev().cloned().collect::<Vec<_>>(),
                y.into_iter().rev().collect(),
            )
            .unwrap(),
        )
        .unwrap();
        let q = simulate::iid_normal(3 * 50, 15);
        for x in q.chunks(3) {
            assert_eq!(a.predict(x), b.predict(x));
            assert!((a.posterior(x)[1] - b.posterior(x)[1]).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn posteriors_sum_to_one(a in -50.0..50.0f64, b in -50.0..50.0f64) {
            let rows = vec![vec![0.0, 1.0], vec![1.0, 0.5], vec![3.0, -1.0], vec![4.0, -2.0]];
            let y = vec![Label::Down, Label::Down, Label::Up, Label::Up];
            let m = GaussianNb::fit(&Dataset::from_rows(&rows, y).unwrap()).unwrap();
            let p = m.posterior(&[a, b]);
            prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
