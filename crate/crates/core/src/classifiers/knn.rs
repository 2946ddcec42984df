//! K-nearest neighbors under Euclidean distance.
//!
//! Neighbors at equal distance are taken in training-row order and a split
//! vote resolves to up.

use serde::{Deserialize, Serialize};

use super::{majority, Dataset, FitDiagnostics, Fitted, Label, ModelSpec, TrainedModel};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub train: Dataset,
}

impl KnnModel {
    pub fn fit(data: &Dataset, k: usize) -> Result<TrainedModel> {
        check_k(k, data.len())?;
        let model = KnnModel { k, train: data.clone() };
        Ok(TrainedModel::new(
            ModelSpec::Knn { k },
            data,
            Fitted::Knn(model),
            FitDiagnostics {
                converged: true,
                iterations: 0,
                warning: None,
            },
        ))
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        vote(&self.train, self.k, x)
    }
}

/// Indices of the `k` nearest rows, nearest first.
pub fn nearest(train: &Dataset, k: usize, x: &[f64]) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = (0..train.len())
        .map(|i| {
            let dist: f64 = train.row(i).iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            (dist, i)
        })
        .collect();
    let k = k.min(d.len());
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < d.len() {
        d.select_nth_unstable_by(k, cmp);
        d.truncate(k);
    }
    d.sort_unstable_by(cmp);
    d.into_iter().map(|(_, i)| i).collect()
}

fn vote(train: &Dataset, k: usize, x: &[f64]) -> Label {
    let idx = nearest(train, k, x);
    let ups = idx.iter().filter(|&&i| train.labels()[i] == Label::Up).count();
    majority(ups, idx.len())
}

fn check_k(k: usize, rows: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidInput("K must be positive".into()));
    }
    if k > rows {
        return Err(Error::InsufficientData { needed: k, got: rows });
    }
    Ok(())
}

/// Classifies `x` by majority vote of its `k` nearest training rows.
pub fn predict_knn(train: &Dataset, k: usize, x: &[f64]) -> Result<Label> {
    check_k(k, train.len())?;
    if x.len() != train.n_features() {
        return Err(Error::InvalidInput("query width does not match training data".into()));
    }
    Ok(vote(train, k, x))
}
