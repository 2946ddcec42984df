//! Soft-margin support vector machine trained by SMO.
//!
//! Solves the dual
//!
//! ```text
//! min_a  0.5 a'Qa - 1'a   s.t.  0 <= a_i <= C,  y'a = 0,   Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! with second-order working-set selection (Fan, Chen and Lin, 2005) on a
//! precomputed kernel matrix. Training stops once the maximal KKT violation
//! drops below `eps`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Dataset, FitDiagnostics, Fitted, Kernel, Label, ModelSpec, TrainedModel};
use crate::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmOptions {
    /// Stopping tolerance on the maximal KKT violation.
    pub eps: f64,
    /// `None` means `max(10_000_000, 100 n)`.
    pub max_iterations: Option<usize>,
}

impl Default for SvmOptions {
    fn default() -> Self {
        SvmOptions {
            eps: 1e-3,
            max_iterations: None,
        }
    }
}

/// Kernel with its resolved parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ResolvedKernel {
    Rbf { gamma: f64 },
    Poly { degree: u32 },
}

impl ResolvedKernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            ResolvedKernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
            ResolvedKernel::Poly { degree } => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                dot.powi(degree as i32)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: ResolvedKernel,
    pub n_features: usize,
    /// Support vectors, row-major.
    pub support: Vec<f64>,
    /// `alpha_i * y_i` for each support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
    /// Dual variables of every training row, kept for diagnostics.
    pub alphas: Vec<f64>,
}

impl SvmModel {
    pub fn support_len(&self) -> usize {
        self.coef.len()
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        let s: f64 = self
            .support
            .chunks(self.n_features)
            .zip(&self.coef)
            .map(|(sv, c)| c * self.kernel.eval(sv, x))
            .sum();
        s + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        Label::from_up(self.decision(x) >= 0.0)
    }
}

/// Kernel matrix over the distinct training rows, stored in `f32`.
/// Trend features take few distinct values, so this is often far smaller
/// than `n x n`.
struct KernelMatrix {
    /// Distinct-row index of every training row.
    ids: Vec<u32>,
    m: usize,
    k: Vec<f32>,
}

impl KernelMatrix {
    fn new(data: &Dataset, kernel: ResolvedKernel) -> Self {
        let mut seen: HashMap<Vec<u64>, u32> = HashMap::new();
        let mut unique: Vec<usize> = Vec::new();
        let ids = (0..data.len())
            .map(|i| {
                let key = data.row(i).iter().map(|v| v.to_bits()).collect();
                *seen.entry(key).or_insert_with(|| {
                    unique.push(i);
                    (unique.len() - 1) as u32
                })
            })
            .collect();
        let m = unique.len();
        let mut k = vec![0f32; m * m];
        k.par_chunks_mut(m).enumerate().for_each(|(a, row)| {
            let xa = data.row(unique[a]);
            for (b, v) in row.iter_mut().enumerate() {
                *v = kernel.eval(xa, data.row(unique[b])) as f32;
            }
        });
        KernelMatrix { ids, m, k }
    }

    /// Kernel values of training row `i` against every distinct row.
    #[inline]
    fn row(&self, i: usize) -> &[f32] {
        let a = self.ids[i] as usize;
        &self.k[a * self.m..(a + 1) * self.m]
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i)[self.ids[j] as usize] as f64
    }
}

struct Solution {
    alpha: Vec<f64>,
    rho: f64,
    iterations: usize,
    converged: bool,
}

fn solve(km: &KernelMatrix, y: &[f64], c: f64, opts: &SvmOptions) -> Solution {
    let n = y.len();
    let max_iter = opts.max_iterations.unwrap_or_else(|| (100 * n).max(10_000_000));
    let mut alpha = vec![0.0; n];
    // Gradient of the dual objective: G = Q a - 1.
    let mut grad = vec![-1.0; n];
    let diag: Vec<f64> = (0..n).map(|i| km.get(i, i)).collect();

    let is_upper = |a: f64| a >= c;
    let is_lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // i maximizes -y_t G_t over I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            let in_up = if y[t] > 0.0 {
                !is_upper(alpha[t])
            } else {
                !is_lower(alpha[t])
            };
            if in_up && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i_sel = t;
            }
        }
        // j minimizes the second-order decrease over violating I_low.
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut obj_min = f64::INFINITY;
        if i_sel != usize::MAX {
            let ki = km.row(i_sel);
            let ids = &km.ids;
            for t in 0..n {
                let in_low = if y[t] > 0.0 {
                    !is_lower(alpha[t])
                } else {
                    !is_upper(alpha[t])
                };
                if !in_low {
                    continue;
                }
                let yg = y[t] * grad[t];
                gmax2 = gmax2.max(yg);
                let b = gmax + yg;
                if b > 0.0 {
                    let a = diag[i_sel] + diag[t] - 2.0 * ki[ids[t] as usize] as f64;
                    let a = if a > 0.0 { a } else { TAU };
                    let obj = -(b * b) / a;
                    if obj < obj_min {
                        obj_min = obj;
                        j_sel = t;
                    }
                }
            }
        }
        if gmax + gmax2 < opts.eps || j_sel == usize::MAX {
            converged = true;
            break;
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let kij = km.get(i, j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (diag[i] + diag[j] - 2.0 * kij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (diag[i] + diag[j] - 2.0 * kij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = (alpha[i] - old_i) * y[i];
        let dj = (alpha[j] - old_j) * y[j];
        let (ri, rj) = (km.row(i), km.row(j));
        for (t, &u) in km.ids.iter().enumerate() {
            let u = u as usize;
            grad[t] += y[t] * (ri[u] as f64 * di + rj[u] as f64 * dj);
        }
    }

    // Bias from free vectors, or the midpoint of the feasible interval.
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut sum_free = 0.0;
    let mut n_free = 0usize;
    for t in 0..n {
        let yg = y[t] * grad[t];
        if is_upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if is_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    Solution {
        alpha,
        rho,
        iterations,
        converged,
    }
}

pub fn fit_svm_with(data: &Dataset, kernel: Kernel, c: f64, opts: &SvmOptions) -> Result<TrainedModel> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidInput(format!("SVM C must be positive, got {c}")));
    }
    if !data.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let d = data.n_features();
    let resolved = match kernel {
        Kernel::Rbf { gamma } => ResolvedKernel::Rbf {
            gamma: gamma.resolve(d),
        },
        Kernel::Poly { degree } => ResolvedKernel::Poly { degree },
    };
    let km = KernelMatrix::new(data, resolved);
    let y: Vec<f64> = data.labels().iter().map(|l| l.sign()).collect();
    let sol = solve(&km, &y, c, opts);

    let mut support = Vec::new();
    let mut coef = Vec::new();
    for (i, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support.extend_from_slice(data.row(i));
            coef.push(a * y[i]);
        }
    }
    let warning = (!sol.converged).then(|| format!("SMO stopped after {} iterations", sol.iterations));
    let spec = ModelSpec::Svm { kernel, c };
    if let Some(w) = &warning {
        log::warn!("{spec}: {w}");
    }
    let model = SvmModel {
        kernel: resolved,
        n_features: d,
        support,
        coef,
        bias: -sol.rho,
        alphas: sol.alpha,
    };
    Ok(TrainedModel::new(
        spec,
        data,
        Fitted::Svm(model),
        FitDiagnostics {
            converged: sol.converged,
            iterations: sol.iterations,
            warning,
        },
    ))
}

pub fn fit_svm(data: &Dataset, kernel: Kernel, c: f64) -> Result<TrainedModel> {
    fit_svm_with(data, kernel, c, &SvmOptions::default())
}
