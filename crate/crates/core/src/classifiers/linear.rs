use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::features::RecordEncoder;
use super::{check_training_inputs, class_index, normalized_weights, softmax_in_place, ClassifierError, PassProbability};
use crate::corpus::{CheckRecord, Status};
use crate::rng::seeded;
use crate::vectors::{doc_vector, EmbeddingModel};

/// Per-column centering and scaling fitted on training inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub inv_std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>], dims: usize) -> Self {
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dims];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dims];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let inv_std = var.into_iter().map(|v| if v > 0.0 { (n / v).sqrt() } else { 1.0 }).collect();
        Standardizer { mean, inv_std }
    }

    pub fn identity(dims: usize) -> Self {
        Standardizer { mean: vec![0.0; dims], inv_std: vec![1.0; dims] }
    }

    pub fn apply(&self, x: &mut [f64]) {
        for ((x, m), s) in x.iter_mut().zip(&self.mean).zip(&self.inv_std) {
            *x = (*x - m) * s;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxParams {
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for SoftmaxParams {
    fn default() -> Self {
        SoftmaxParams { epochs: 20, lr: 0.1, l2: 1e-4, seed: 0 }
    }
}

/// `softmax(W x + b)` over the standardized mean word vector of a record's token stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxClassifier {
    pub encoder: RecordEncoder,
    pub embedding: EmbeddingModel,
    pub standardizer: Standardizer,
    /// 2 × D, row-major, rows in class order (fail, pass).
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub params: SoftmaxParams,
    pub loss_by_epoch: Vec<f64>,
}

impl SoftmaxClassifier {
    pub fn dims(&self) -> usize {
        self.embedding.dims()
    }

    fn input(&self, record: &CheckRecord) -> Vec<f64> {
        let mut x = doc_vector(&self.encoder.token_stream(record), &self.embedding).0;
        self.standardizer.apply(&mut x);
        x
    }

    fn probs(&self, x: &[f64]) -> [f64; 2] {
        let d = self.dims();
        let mut z = [0.0; 2];
        for (k, zk) in z.iter_mut().enumerate() {
            *zk = self.bias[k] + self.weights[k * d..(k + 1) * d].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        softmax_in_place(&mut z);
        z
    }

    /// Class probabilities in (fail, pass) order.
    pub fn predict_classes(&self, record: &CheckRecord) -> [f64; 2] {
        self.probs(&self.input(record))
    }
}

impl PassProbability for SoftmaxClassifier {
    fn predict_proba(&self, record: &CheckRecord) -> f64 {
        self.predict_classes(record)[1]
    }
}

/// Weighted cross-entropy SGD with a linearly decaying rate; the embedding stays frozen.
pub fn train_softmax_classifier(
    records: &[CheckRecord],
    labels: &[Status],
    weights: Option<&[f64]>,
    encoder: RecordEncoder,
    embedding: EmbeddingModel,
    params: &SoftmaxParams,
) -> Result<SoftmaxClassifier, ClassifierError> {
    let n = check_training_inputs(records, labels)?;
    let w = normalized_weights(weights, n)?;
    let d = embedding.dims();

    let mut xs: Vec<Vec<f64>> = records.iter().map(|r| doc_vector(&encoder.token_stream(r), &embedding).0).collect();
    let standardizer = Standardizer::fit(&xs, d);
    xs.iter_mut().for_each(|x| standardizer.apply(x));
    let ys: Vec<usize> = labels.iter().map(|&s| class_index(s)).collect();

    let mut model = SoftmaxClassifier {
        encoder,
        embedding,
        standardizer,
        weights: vec![0.0; 2 * d],
        bias: vec![0.0; 2],
        params: params.clone(),
        loss_by_epoch: Vec::with_capacity(params.epochs),
    };

    let mut rng = seeded(params.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let total = (params.epochs * n).max(1) as f64;
    let mut step = 0usize;
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        for &i in &order {
            let lr = params.lr * (1.0 - step as f64 / total).max(1e-4);
            step += 1;
            let x = &xs[i];
            let p = model.probs(x);
            loss -= w[i] * p[ys[i]].max(f64::MIN_POSITIVE).ln();
            for k in 0..2 {
                let g = w[i] * (p[k] - if k == ys[i] { 1.0 } else { 0.0 });
                let row = &mut model.weights[k * d..(k + 1) * d];
                for (wk, xv) in row.iter_mut().zip(x) {
                    *wk -= lr * (g * xv + params.l2 * *wk);
                }
                model.bias[k] -= lr * g;
            }
        }
        let loss = loss / n as f64;
        if !loss.is_finite() || model.weights.iter().any(|v| !v.is_finite()) {
            return Err(ClassifierError::NonFiniteLoss { epoch });
        }
        model.loss_by_epoch.push(loss);
    }
    Ok(model)
}
