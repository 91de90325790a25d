//! Binary filter-label classifiers: k-nearest neighbours, logistic
//! regression, an RBF support vector machine, a dense network and a 1-D
//! convolutional network, behind one train/predict/evaluate interface.

pub mod knn;
pub mod logreg;
pub mod model_io;
pub mod nn;
pub mod svm;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use knn::Knn;
pub use logreg::LogReg;
pub use model_io::{read_model, write_model, DenoiseContext, ModelFile};
pub use nn::{EpochStats, LayerSpec, NetSpec, Network, Optimizer};
pub use svm::Svm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Knn,
    Logreg,
    Svm,
    Dnn,
    Cnn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Knn,
        ModelKind::Logreg,
        ModelKind::Svm,
        ModelKind::Dnn,
        ModelKind::Cnn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::Logreg => "logreg",
            ModelKind::Svm => "svm",
            ModelKind::Dnn => "dnn",
            ModelKind::Cnn => "cnn",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown model `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Knn { k: usize },
    Logreg { c: f64, max_iter: usize, tol: f64 },
    /// `gamma: None` means `1 / feature_dim`.
    Svm { c: f64, gamma: Option<f64>, tol: f64, max_iter: usize },
    Dnn(NetSpec),
    Cnn(NetSpec),
}

impl ModelSpec {
    pub fn default_for(kind: ModelKind, seed: u64) -> Self {
        match kind {
            ModelKind::Knn => ModelSpec::Knn { k: 5 },
            ModelKind::Logreg => ModelSpec::Logreg {
                c: 1.0,
                max_iter: 100,
                tol: 1e-8,
            },
            ModelKind::Svm => ModelSpec::Svm {
                c: 1.0,
                gamma: None,
                tol: 1e-3,
                max_iter: 10_000_000,
            },
            ModelKind::Dnn => ModelSpec::Dnn(NetSpec { seed, ..NetSpec::dnn() }),
            ModelKind::Cnn => ModelSpec::Cnn(NetSpec { seed, ..NetSpec::cnn() }),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Knn { .. } => ModelKind::Knn,
            ModelSpec::Logreg { .. } => ModelKind::Logreg,
            ModelSpec::Svm { .. } => ModelKind::Svm,
            ModelSpec::Dnn(_) => ModelKind::Dnn,
            ModelSpec::Cnn(_) => ModelKind::Cnn,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ModelSpec::Dnn(n) | ModelSpec::Cnn(n) => n.seed,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Knn(Knn),
    Logreg(LogReg),
    Svm(Svm),
    Net(Network),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub input_dim: usize,
    pub params: Params,
    /// Per-epoch loss and accuracy; empty for the non-iterative models.
    pub history: Vec<EpochStats>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: u8,
    pub probabilities: [f64; 2],
}

impl Prediction {
    /// Argmax of the pair, ties to 0.
    pub fn from_probabilities(p: [f64; 2]) -> Self {
        Prediction {
            label: u8::from(p[1] > p[0]),
            probabilities: p,
        }
    }
}

fn check_rows(x: &[Vec<f64>]) -> Result<usize> {
    let d = x.first().map_or(0, Vec::len);
    if x.is_empty() || d == 0 {
        return Err(Error::EmptyDataset);
    }
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::invalid("feature vectors differ in length"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite feature value"));
    }
    Ok(d)
}

fn to_array(x: &[Vec<f64>]) -> Array2<f64> {
    let d = x[0].len();
    Array2::from_shape_fn((x.len(), d), |(i, j)| x[i][j])
}

pub fn train(x: &[Vec<f64>], y: &[u8], spec: &ModelSpec) -> Result<TrainedModel> {
    let d = check_rows(x)?;
    if y.len() != x.len() {
        return Err(Error::invalid("label count does not match example count"));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    let ones = y.iter().filter(|&&v| v == 1).count();
    let fewest = ones.min(y.len() - ones);
    if fewest == 0 {
        return Err(Error::DegenerateLabels);
    }
    if fewest < 2 && spec.kind() != ModelKind::Knn {
        return Err(Error::InsufficientData { needed: 2, got: fewest });
    }
    let (params, history) = match spec {
        ModelSpec::Knn { k } => (Params::Knn(Knn::fit(*k, x, y)?), Vec::new()),
        ModelSpec::Logreg { c, max_iter, tol } => (Params::Logreg(LogReg::fit(x, y, *c, *max_iter, *tol)?), Vec::new()),
        ModelSpec::Svm { c, gamma, tol, max_iter } => {
            let gamma = gamma.unwrap_or(1.0 / d as f64);
            (Params::Svm(Svm::fit(x, y, *c, gamma, *tol, *max_iter)?), Vec::new())
        }
        ModelSpec::Dnn(net) | ModelSpec::Cnn(net) => {
            let (network, history) = nn::fit(net, &to_array(x), y)?;
            (Params::Net(network), history)
        }
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        input_dim: d,
        params,
        history,
    })
}

impl TrainedModel {
    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.input_dim {
            return Err(Error::invalid(format!(
                "feature vector of length {len} for a model trained on {}",
                self.input_dim
            )));
        }
        Ok(())
    }

    pub fn predict(&self, q: &[f64]) -> Result<Prediction> {
        self.check_dim(q.len())?;
        let p = match &self.params {
            Params::Knn(m) => m.probabilities(q),
            Params::Logreg(m) => m.probabilities(q),
            Params::Svm(m) => m.probabilities(q),
            Params::Net(net) => {
                let x = Array2::from_shape_vec((1, q.len()), q.to_vec()).expect("one row");
                let p = nn::softmax(&net.logits(&x)?);
                [p[[0, 0]], p[[0, 1]]]
            }
        };
        Ok(Prediction::from_probabilities(p))
    }

    /// Row-wise prediction; networks run in batches, the rest in parallel.
    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        for r in xs {
            self.check_dim(r.len())?;
        }
        match &self.params {
            Params::Net(net) => {
                let mut out = Vec::with_capacity(xs.len());
                for chunk in xs.chunks(128) {
                    let p = nn::softmax(&net.logits(&to_array(chunk))?);
                    out.extend(
                        p.outer_iter()
                            .map(|r| Prediction::from_probabilities([r[0], r[1]])),
                    );
                }
                Ok(out)
            }
            _ => xs.par_iter().map(|r| self.predict(r)).collect(),
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: [[usize; 2]; 2],
    /// Per class; 0 when the class is never predicted.
    pub precision: [f64; 2],
    /// Per class; 0 when the class is absent.
    pub recall: [f64; 2],
}

impl Metrics {
    pub fn from_labels(truth: &[u8], predicted: &[u8]) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if truth.len() != predicted.len() {
            return Err(Error::invalid("prediction count does not match label count"));
        }
        let mut confusion = [[0usize; 2]; 2];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[usize::from(t)][usize::from(p)] += 1;
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let correct = confusion[0][0] + confusion[1][1];
        Ok(Metrics {
            accuracy: ratio(correct, truth.len()),
            confusion,
            precision: [0, 1].map(|c| ratio(confusion[c][c], confusion[0][c] + confusion[1][c])),
            recall: [0, 1].map(|c| ratio(confusion[c][c], confusion[c][0] + confusion[c][1])),
        })
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }
}

pub fn evaluate(model: &TrainedModel, xs: &[Vec<f64>], ys: &[u8]) -> Result<Metrics> {
    if xs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let predicted: Vec<u8> = model.predict_batch(xs)?.iter().map(|p| p.label).collect();
    Metrics::from_labels(ys, &predicted)
}

/// Accuracy of always answering the more frequent class of `labels`.
pub fn majority_accuracy(labels: &[u8]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let ones = labels.iter().filter(|&&v| v == 1).count();
    ones.max(labels.len() - ones) as f64 / labels.len() as f64
}
