//! Pass/fail classifiers and class rebalancing.
//!
//! Three model families share one [`PassProbability`] interface:
//! a linear softmax over averaged word vectors, a small dense network over
//! word vectors plus one-hot categoricals, and a random forest over top-word counts.

mod dense;
mod features;
mod forest;
mod linear;
mod model;
mod rebalance;

use thiserror::Error;

use crate::corpus::{CheckRecord, LabelMode, Status};
use crate::textprep::TextError;
use crate::vectors::VectorError;

pub use dense::{Activation, DenseNetClassifier, DenseParams, Layer};
pub use features::{CategoryEncoder, Feature, FeatureSet, RecordEncoder, TopWordsEncoder};
pub use forest::{ForestParams, Node, RandomForestClassifier, Tree};
pub use linear::{SoftmaxClassifier, SoftmaxParams, Standardizer};
pub use model::{fit_classifier, Model, ModelFile, ModelKind, TrainConfig};
pub use rebalance::{rebalance, rebalance_labels, Rebalanced, RebalanceSpec};

/// Class order used by every model: index 0 is fail, index 1 is pass.
pub const CLASSES: [Status; 2] = [Status::Fail, Status::Pass];

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("unknown feature name {0:?}")]
    UnknownFeature(String),
    #[error("feature set is empty")]
    EmptyFeatureSet,
    #[error("selected features produce no columns")]
    EmptyFeatureMatrix,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("class {0} has no training records")]
    EmptyClass(Status),
    #[error("record {id} has no label")]
    MissingLabel { id: String },
    #[error("softmax input contains a non-finite value")]
    NonFiniteInput,
    #[error("training diverged: non-finite loss in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("target ratio must be a finite value >= 1, got {0}")]
    InvalidRatio(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{what}: lengths differ ({left} vs {right})")]
    LengthMismatch { what: &'static str, left: usize, right: usize },
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Probability that a check passes.
pub trait PassProbability {
    fn predict_proba(&self, record: &CheckRecord) -> f64;

    fn predict_batch(&self, records: &[CheckRecord]) -> Vec<f64> {
        records.iter().map(|r| self.predict_proba(r)).collect()
    }
}

/// Max-shifted softmax.
pub fn softmax(z: &[f64]) -> Result<Vec<f64>, ClassifierError> {
    if z.iter().any(|x| !x.is_finite()) {
        return Err(ClassifierError::NonFiniteInput);
    }
    let mut out = z.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// Softmax for inputs already known to be finite.
pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in z.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in z.iter_mut() {
        *x /= sum;
    }
}

pub(crate) fn class_index(s: Status) -> usize {
    match s {
        Status::Fail => 0,
        Status::Pass => 1,
    }
}

/// Labels under `mode`, with both classes required.
pub fn training_labels(records: &[CheckRecord], mode: LabelMode) -> Result<Vec<Status>, ClassifierError> {
    if records.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    let labels = records
        .iter()
        .map(|r| r.label(mode).ok_or_else(|| ClassifierError::MissingLabel { id: r.id.clone() }))
        .collect::<Result<Vec<_>, _>>()?;
    for class in CLASSES {
        if !labels.contains(&class) {
            return Err(ClassifierError::EmptyClass(class));
        }
    }
    Ok(labels)
}

/// Validate a labelled training set and return its size.
pub(crate) fn check_training_inputs(records: &[CheckRecord], labels: &[Status]) -> Result<usize, ClassifierError> {
    if records.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    if records.len() != labels.len() {
        return Err(ClassifierError::LengthMismatch { what: "labels", left: labels.len(), right: records.len() });
    }
    for class in CLASSES {
        if !labels.contains(&class) {
            return Err(ClassifierError::EmptyClass(class));
        }
    }
    Ok(records.len())
}

/// Default to unit weights and rescale to mean 1 so learning rates do not depend on weighting.
pub(crate) fn normalized_weights(weights: Option<&[f64]>, n: usize) -> Result<Vec<f64>, ClassifierError> {
    let Some(w) = weights else { return Ok(vec![1.0; n]) };
    if w.len() != n {
        return Err(ClassifierError::LengthMismatch { what: "weights", left: w.len(), right: n });
    }
    if w.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
        return Err(ClassifierError::InvalidConfig("weights must be finite and non-negative".into()));
    }
    let mean = w.iter().sum::<f64>() / n as f64;
    if mean <= 0.0 {
        return Err(ClassifierError::InvalidConfig("weights sum to zero".into()));
    }
    Ok(w.iter().map(|x| x / mean).collect())
}
