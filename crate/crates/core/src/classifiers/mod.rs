//! Binary momentum classifiers behind one fit/predict contract.
//!
//! Five families are available: L1/L2 logistic regression, soft-margin SVM
//! (RBF or polynomial kernel), random forest, K-nearest neighbors and
//! Gaussian naive Bayes. [`enumerate_grid`] yields the hyperparameter grid
//! searched for each family. Every prediction tie resolves to [`Label::Up`].

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub mod forest;
pub mod gnb;
pub mod knn;
pub mod logistic;
pub mod svm;

pub use forest::{fit_random_forest, DecisionTree, ForestParams, RandomForest};
pub use gnb::{fit_gnb, GaussianNb};
pub use knn::{predict_knn, KnnModel};
pub use logistic::{fit_logistic, LogisticModel, SolverOptions};
pub use svm::{fit_svm, SvmModel, SvmOptions};

/// Next-day price direction. Breaking even counts as up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Down,
    Up,
}

impl Label {
    pub fn from_up(up: bool) -> Self {
        if up {
            Label::Up
        } else {
            Label::Down
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Label::Down => 0,
            Label::Up => 1,
        }
    }

    /// `-1.0` for down, `+1.0` for up.
    pub fn sign(self) -> f64 {
        match self {
            Label::Down => -1.0,
            Label::Up => 1.0,
        }
    }

    /// Accepts `{0, 1}` or `{-1, +1}` encodings.
    pub fn from_code(code: i64) -> Result<Self> {
        match code {
            1 => Ok(Label::Up),
            0 | -1 => Ok(Label::Down),
            other => Err(Error::InvalidInput(format!("label code {other} not in {{-1, 0, 1}}"))),
        }
    }
}

/// Majority of `ups` out of `total` votes; ties go up.
pub(crate) fn majority(ups: usize, total: usize) -> Label {
    Label::from_up(2 * ups >= total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Vec<f64>,
    n_features: usize,
    y: Vec<Label>,
}

impl Dataset {
    /// Row-major features; `x.len()` must equal `y.len() * n_features`.
    pub fn new(x: Vec<f64>, n_features: usize, y: Vec<Label>) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::InvalidInput("dataset needs at least one feature".into()));
        }
        if x.len() != y.len() * n_features {
            return Err(Error::InvalidInput(format!(
                "{} feature values do not fill {} rows of {n_features}",
                x.len(),
                y.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dataset contains non-finite features".into()));
        }
        Ok(Dataset { x, n_features, y })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: Vec<Label>) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_features) {
            return Err(Error::InvalidInput("ragged feature rows".into()));
        }
        Self::new(rows.concat(), n_features, y)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn labels(&self) -> &[Label] {
        &self.y
    }

    pub fn count_up(&self) -> usize {
        self.y.iter().filter(|&&l| l == Label::Up).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let up = self.count_up();
        up > 0 && up < self.len()
    }

    fn map_rows(&self, f: impl Fn(&[f64], &mut [f64])) -> Dataset {
        let mut x = vec![0.0; self.x.len()];
        for (src, dst) in self.x.chunks(self.n_features).zip(x.chunks_mut(self.n_features)) {
            f(src, dst);
        }
        Dataset {
            x,
            n_features: self.n_features,
            y: self.y.clone(),
        }
    }
}

/// Per-feature z-scoring fitted on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &Dataset) -> Self {
        let d = data.n_features();
        let n = data.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for i in 0..data.len() {
            for (m, v) in mean.iter_mut().zip(data.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for i in 0..data.len() {
            for ((s, v), m) in var.iter_mut().zip(data.row(i)).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn transform_into(&self, x: &[f64], out: &mut [f64]) {
        for (((o, v), m), s) in out.iter_mut().zip(x).zip(&self.mean).zip(&self.scale) {
            *o = (v - m) / s;
        }
    }

    pub fn transform(&self, data: &Dataset) -> Dataset {
        data.map_rows(|src, dst| self.transform_into(src, dst))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    #[default]
    None,
    Standardize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "LOG")]
    Logistic,
    #[serde(rename = "SVM")]
    Svm,
    #[serde(rename = "RF")]
    RandomForest,
    #[serde(rename = "KNN")]
    Knn,
    #[serde(rename = "GNB")]
    GaussianNb,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Logistic,
        Family::Svm,
        Family::RandomForest,
        Family::Knn,
        Family::GaussianNb,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Family::Logistic => "LOG",
            Family::Svm => "SVM",
            Family::RandomForest => "RF",
            Family::Knn => "KNN",
            Family::GaussianNb => "GNB",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown model family `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gamma {
    /// `1 / n_features`.
    Auto,
    Value(f64),
}

impl Gamma {
    pub fn resolve(self, n_features: usize) -> f64 {
        match self {
            Gamma::Auto => 1.0 / n_features as f64,
            Gamma::Value(g) => g,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "lowercase")]
pub enum Kernel {
    Rbf {
        gamma: Gamma,
    },
    /// `(x . z)^degree`; the additive constant is fixed at zero.
    Poly {
        degree: u32,
    },
}

/// A model family with the hyperparameters relevant to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum ModelSpec {
    #[serde(rename = "LOG")]
    Logistic { penalty: Penalty, c: f64 },
    #[serde(rename = "SVM")]
    Svm { kernel: Kernel, c: f64 },
    #[serde(rename = "RF")]
    RandomForest { trees: usize, seed: u64 },
    #[serde(rename = "KNN")]
    Knn { k: usize },
    #[serde(rename = "GNB")]
    GaussianNb,
}

impl ModelSpec {
    pub fn family(&self) -> Family {
        match self {
            ModelSpec::Logistic { .. } => Family::Logistic,
            ModelSpec::Svm { .. } => Family::Svm,
            ModelSpec::RandomForest { .. } => Family::RandomForest,
            ModelSpec::Knn { .. } => Family::Knn,
            ModelSpec::GaussianNb => Family::GaussianNb,
        }
    }

    /// Replaces the random seed where the family uses one.
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            ModelSpec::RandomForest { trees, .. } => ModelSpec::RandomForest { trees, seed },
            other => other,
        }
    }

    /// Stable human-readable identifier, also used for ordering ties.
    pub fn label(&self) -> String {
        match self {
            ModelSpec::Logistic { penalty, c } => {
                let p = match penalty {
                    Penalty::L1 => "l1",
                    Penalty::L2 => "l2",
                };
                format!("LOG(penalty={p},C={c})")
            }
            ModelSpec::Svm { kernel, c } => match kernel {
                Kernel::Rbf { gamma: Gamma::Auto } => format!("SVM(kernel=rbf,gamma=auto,C={c})"),
                Kernel::Rbf { gamma: Gamma::Value(g) } => format!("SVM(kernel=rbf,gamma={g},C={c})"),
                Kernel::Poly { degree } => format!("SVM(kernel=poly,degree={degree},C={c})"),
            },
            ModelSpec::RandomForest { trees, .. } => format!("RF(trees={trees})"),
            ModelSpec::Knn { k } => format!("KNN(K={k})"),
            ModelSpec::GaussianNb => "GNB".to_string(),
        }
    }

    /// One representative grid point per family.
    pub fn default_for(family: Family) -> Self {
        match family {
            Family::Logistic => ModelSpec::Logistic {
                penalty: Penalty::L2,
                c: 1.0,
            },
            Family::Svm => ModelSpec::Svm {
                kernel: Kernel::Rbf { gamma: Gamma::Auto },
                c: 1.0,
            },
            Family::RandomForest => ModelSpec::RandomForest { trees: 100, seed: 0 },
            Family::Knn => ModelSpec::Knn { k: 20 },
            Family::GaussianNb => ModelSpec::GaussianNb,
        }
    }
}

impl std::fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

pub const LOG_C: [f64; 6] = [0.01, 1.0, 5.0, 10.0, 50.0, 100.0];
pub const SVM_C: [f64; 3] = [0.5, 1.0, 5.0];
pub const SVM_GAMMA: [Gamma; 3] = [Gamma::Auto, Gamma::Value(1.0), Gamma::Value(4.0)];
pub const SVM_DEGREE: [u32; 3] = [1, 2, 3];
pub const RF_TREES: [usize; 5] = [20, 40, 60, 80, 100];
pub const KNN_K: [usize; 7] = [20, 40, 60, 80, 100, 120, 140];

/// The full hyperparameter grid of a family.
pub fn enumerate_grid(family: Family) -> Vec<ModelSpec> {
    match family {
        Family::Logistic => [Penalty::L1, Penalty::L2]
            .into_iter()
            .flat_map(|penalty| LOG_C.into_iter().map(move |c| ModelSpec::Logistic { penalty, c }))
            .collect(),
        Family::Svm => {
            let rbf = SVM_GAMMA.into_iter().flat_map(|gamma| {
                SVM_C.into_iter().map(move |c| ModelSpec::Svm {
                    kernel: Kernel::Rbf { gamma },
                    c,
                })
            });
            let poly = SVM_DEGREE.into_iter().flat_map(|degree| {
                SVM_C.into_iter().map(move |c| ModelSpec::Svm {
                    kernel: Kernel::Poly { degree },
                    c,
                })
            });
            rbf.chain(poly).collect()
        }
        Family::RandomForest => RF_TREES
            .into_iter()
            .map(|trees| ModelSpec::RandomForest { trees, seed: 0 })
            .collect(),
        Family::Knn => KNN_K.into_iter().map(|k| ModelSpec::Knn { k }).collect(),
        Family::GaussianNb => vec![ModelSpec::GaussianNb],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fitted {
    /// Single-class training data: always predicts that class.
    Constant {
        label: Label,
    },
    Logistic(LogisticModel),
    Svm(SvmModel),
    RandomForest(RandomForest),
    Knn(KnnModel),
    GaussianNb(GaussianNb),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub converged: bool,
    pub iterations: usize,
    pub warning: Option<String>,
}

/// A fitted model. Immutable after fitting and safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub scaler: Option<Standardizer>,
    pub model: Fitted,
    pub n_features: usize,
    pub n_train: usize,
    pub diagnostics: FitDiagnostics,
}

/// JSON-friendly description of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub family: Family,
    pub spec: ModelSpec,
    pub label: String,
    pub n_features: usize,
    pub n_train: usize,
    pub scaled: bool,
    pub converged: bool,
    pub iterations: usize,
    pub warning: Option<String>,
    pub detail: String,
}

impl TrainedModel {
    pub fn predict(&self, x: &[f64]) -> Label {
        assert_eq!(x.len(), self.n_features, "query width does not match the model");
        let mut buf;
        let x = match &self.scaler {
            Some(s) => {
                buf = vec![0.0; x.len()];
                s.transform_into(x, &mut buf);
                &buf[..]
            }
            None => x,
        };
        match &self.model {
            Fitted::Constant { label } => *label,
            Fitted::Logistic(m) => m.predict(x),
            Fitted::Svm(m) => m.predict(x),
            Fitted::RandomForest(m) => m.predict(x),
            Fitted::Knn(m) => m.predict(x),
            Fitted::GaussianNb(m) => m.predict(x),
        }
    }

    pub fn predict_all(&self, data: &Dataset) -> Vec<Label> {
        (0..data.len()).map(|i| self.predict(data.row(i))).collect()
    }

    pub fn summary(&self) -> ModelSummary {
        let detail = match &self.model {
            Fitted::Constant { label } => format!("constant {label:?}"),
            Fitted::Logistic(m) => format!(
                "bias={:.6} |w|_1={:.6}",
                m.bias,
                m.weights.iter().map(|w| w.abs()).sum::<f64>()
            ),
            Fitted::Svm(m) => format!("support_vectors={} bias={:.6}", m.support_len(), m.bias),
            Fitted::RandomForest(m) => format!("trees={} nodes={}", m.trees.len(), m.node_count()),
            Fitted::Knn(m) => format!("k={} retained={}", m.k, m.train.len()),
            Fitted::GaussianNb(m) => format!("priors=[{:.4}, {:.4}]", m.priors[0], m.priors[1]),
        };
        ModelSummary {
            family: self.spec.family(),
            spec: self.spec,
            label: self.spec.label(),
            n_features: self.n_features,
            n_train: self.n_train,
            scaled: self.scaler.is_some(),
            converged: self.diagnostics.converged,
            iterations: self.diagnostics.iterations,
            warning: self.diagnostics.warning.clone(),
            detail,
        }
    }
}

/// Fits `spec` on `data`, standardizing features first when asked to.
pub fn fit(spec: &ModelSpec, data: &Dataset, scaling: Scaling) -> Result<TrainedModel> {
    if data.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let scaler = (scaling == Scaling::Standardize).then(|| Standardizer::fit(data));
    let scaled;
    let train = match &scaler {
        Some(s) => {
            scaled = s.transform(data);
            &scaled
        }
        None => data,
    };
    let mut model = match *spec {
        ModelSpec::Logistic { penalty, c } => fit_logistic(train, penalty, c)?,
        ModelSpec::Svm { kernel, c } => fit_svm(train, kernel, c)?,
        ModelSpec::RandomForest { trees, seed } => fit_random_forest(train, trees, seed)?,
        ModelSpec::Knn { k } => KnnModel::fit(train, k)?,
        ModelSpec::GaussianNb => fit_gnb(train)?,
    };
    model.spec = *spec;
    model.scaler = scaler;
    Ok(model)
}

impl TrainedModel {
    /// Predicts the only class present in `data`, flagged with a warning.
    pub(crate) fn constant(spec: ModelSpec, data: &Dataset) -> Self {
        let label = data.labels().first().copied().unwrap_or(Label::Up);
        let warning = format!("single-class training data; always predicting {label:?}");
        log::warn!("{spec}: {warning}");
        Self::new(
            spec,
            data,
            Fitted::Constant { label },
            FitDiagnostics {
                converged: true,
                iterations: 0,
                warning: Some(warning),
            },
        )
    }

    pub(crate) fn new(spec: ModelSpec, data: &Dataset, model: Fitted, diagnostics: FitDiagnostics) -> Self {
        TrainedModel {
            spec,
            scaler: None,
            model,
            n_features: data.n_features(),
            n_train: data.len(),
            diagnostics,
        }
    }
}
