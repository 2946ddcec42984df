//! Penalized logistic regression.
//!
//! Minimizes the per-sample average objective
//!
//! ```text
//! f(w, b) = (1/n) sum_i [log(1 + exp(z_i)) - y_i z_i] + (1 / (C n)) R(w),   z_i = x_i . w + b
//! ```
//!
//! with `R(w) = ||w||_1` or `||w||_2^2` and an unpenalized intercept, using
//! accelerated proximal gradient (FISTA) with adaptive restart.

use serde::{Deserialize, Serialize};

use super::{Dataset, FitDiagnostics, Fitted, Label, ModelSpec, Penalty, TrainedModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop once the norm of the gradient mapping falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-6,
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    /// Probability of an up move.
    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        Label::from_up(self.decision(x) >= 0.0)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Parameter layout: `theta = [w_1, ..., w_d, b]`.
fn smooth_part(theta: &[f64], data: &Dataset, lambda_l2: f64, grad: &mut [f64]) -> f64 {
    let d = data.n_features();
    let n = data.len() as f64;
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    for i in 0..data.len() {
        let x = data.row(i);
        let z = theta[d] + theta[..d].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        let y = if data.labels()[i] == Label::Up { 1.0 } else { 0.0 };
        loss += softplus(z) - y * z;
        let r = sigmoid(z) - y;
        for (g, v) in grad[..d].iter_mut().zip(x) {
            *g += r * v;
        }
        grad[d] += r;
    }
    grad.iter_mut().for_each(|g| *g /= n);
    let mut ridge = 0.0;
    for (g, w) in grad[..d].iter_mut().zip(&theta[..d]) {
        *g += 2.0 * lambda_l2 * w;
        ridge += w * w;
    }
    loss / n + lambda_l2 * ridge
}

/// Mean log-loss without the penalty.
pub fn training_loss(model: &LogisticModel, data: &Dataset) -> f64 {
    let total: f64 = (0..data.len())
        .map(|i| {
            let z = model.decision(data.row(i));
            let y = if data.labels()[i] == Label::Up { 1.0 } else { 0.0 };
            softplus(z) - y * z
        })
        .sum();
    total / data.len() as f64
}

/// Full objective and its gradient at `theta = [w, b]`. For L1 the gradient
/// uses `sign(w)`, valid away from zero weights.
pub fn objective_and_gradient(theta: &[f64], data: &Dataset, penalty: Penalty, c: f64) -> (f64, Vec<f64>) {
    let lambda = 1.0 / (c * data.len() as f64);
    let mut grad = vec![0.0; theta.len()];
    let d = data.n_features();
    match penalty {
        Penalty::L2 => {
            let f = smooth_part(theta, data, lambda, &mut grad);
            (f, grad)
        }
        Penalty::L1 => {
            let f = smooth_part(theta, data, 0.0, &mut grad);
            let l1: f64 = theta[..d].iter().map(|w| w.abs()).sum();
            for (g, w) in grad[..d].iter_mut().zip(&theta[..d]) {
                *g += lambda * w.signum();
            }
            (f + lambda * l1, grad)
        }
    }
}

/// Upper bound on the Lipschitz constant of the smooth gradient:
/// `0.25 * lambda_max(A'A / n)` with `A = [X 1]`, bounded by power iteration
/// and padded slightly.
fn lipschitz(data: &Dataset) -> f64 {
    let d = data.n_features();
    let n = data.len() as f64;
    let mut gram = vec![0.0; (d + 1) * (d + 1)];
    let mut a = vec![0.0; d + 1];
    for i in 0..data.len() {
        a[..d].copy_from_slice(data.row(i));
        a[d] = 1.0;
        for r in 0..=d {
            for c in 0..=d {
                gram[r * (d + 1) + c] += a[r] * a[c];
            }
        }
    }
    // Power iteration; the Frobenius norm caps it as a safe fallback.
    let frob = gram.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut v = vec![1.0; d + 1];
    let mut lambda = 0.0;
    for _ in 0..100 {
        let mut w = vec![0.0; d + 1];
        for r in 0..=d {
            w[r] = (0..=d).map(|c| gram[r * (d + 1) + c] * v[c]).sum();
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        let next = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.into_iter().map(|x| x / norm).collect();
        if (next - lambda).abs() <= 1e-9 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    0.25 * (lambda * 1.01).min(frob).max(1e-12) / n
}

/// FISTA with gradient-based restart. Returns the parameters, the iteration
/// count and whether the gradient-mapping tolerance was reached.
pub fn solve(data: &Dataset, penalty: Penalty, c: f64, opts: &SolverOptions) -> Result<(Vec<f64>, usize, bool)> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidInput(format!(
            "inverse regularization C must be positive, got {c}"
        )));
    }
    let d = data.n_features();
    let lambda = 1.0 / (c * data.len() as f64);
    let lambda_l2 = if penalty == Penalty::L2 { lambda } else { 0.0 };
    let l = lipschitz(data) + 2.0 * lambda_l2;
    let step = 1.0 / l;
    let shrink = if penalty == Penalty::L1 { lambda * step } else { 0.0 };

    let mut x = vec![0.0; d + 1];
    let mut y = x.clone();
    let mut next = x.clone();
    let mut grad = vec![0.0; d + 1];
    let mut t = 1.0_f64;
    for iter in 1..=opts.max_iterations {
        smooth_part(&y, data, lambda_l2, &mut grad);
        for j in 0..=d {
            let v = y[j] - step * grad[j];
            next[j] = if j < d && shrink > 0.0 {
                v.signum() * (v.abs() - shrink).max(0.0)
            } else {
                v
            };
        }
        // Gradient mapping at y is L (y - next).
        let gm = l * y.iter().zip(&next).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if !gm.is_finite() {
            return Err(Error::InvalidInput("logistic solver diverged".into()));
        }
        if gm < opts.tolerance {
            return Ok((next, iter, true));
        }
        let restart: f64 = y
            .iter()
            .zip(&next)
            .zip(&x)
            .map(|((yy, nn), xx)| (yy - nn) * (nn - xx))
            .sum();
        if restart > 0.0 {
            t = 1.0;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        for j in 0..=d {
            y[j] = next[j] + momentum * (next[j] - x[j]);
        }
        std::mem::swap(&mut x, &mut next);
        t = t_next;
    }
    Ok((x, opts.max_iterations, false))
}

pub fn fit_logistic_with(data: &Dataset, penalty: Penalty, c: f64, opts: &SolverOptions) -> Result<TrainedModel> {
    let spec = ModelSpec::Logistic { penalty, c };
    if data.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: data.len(),
        });
    }
    if !data.has_both_classes() {
        return Ok(TrainedModel::constant(spec, data));
    }
    let (theta, iterations, converged) = solve(data, penalty, c, opts)?;
    let d = data.n_features();
    let model = LogisticModel {
        weights: theta[..d].to_vec(),
        bias: theta[d],
    };
    let warning = (!converged).then(|| format!("no convergence within {} iterations", opts.max_iterations));
    if let Some(w) = &warning {
        log::warn!("{spec}: {w}");
    }
    Ok(TrainedModel::new(
        spec,
        data,
        Fitted::Logistic(model),
        FitDiagnostics {
            converged,
            iterations,
            warning,
        },
    ))
}

pub fn fit_logistic(data: &Dataset, penalty: Penalty, c: f64) -> Result<TrainedModel> {
    fit_logistic_with(data, penalty, c, &SolverOptions::default())
}
