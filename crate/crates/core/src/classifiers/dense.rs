use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::features::{CategoryEncoder, RecordEncoder};
use super::linear::Standardizer;
use super::{check_training_inputs, class_index, normalized_weights, softmax_in_place, ClassifierError, PassProbability};
use crate::corpus::{CheckRecord, Status};
use crate::rng::seeded;
use crate::vectors::{doc_vector, EmbeddingModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - z.tanh().powi(2),
        }
    }
}

/// Fully connected layer, `outputs × inputs` row-major weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn he(inputs: usize, outputs: usize, rng: &mut crate::rng::Rng) -> Layer {
        let normal = Normal::new(0.0, (2.0 / inputs as f64).sqrt()).expect("positive std");
        Layer {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| normal.sample(rng)).collect(),
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            out.push(self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for DenseParams {
    fn default() -> Self {
        DenseParams { hidden: vec![128, 64, 32], activation: Activation::Relu, epochs: 20, lr: 0.05, batch_size: 32, seed: 0 }
    }
}

/// Mean word vector of the text fields concatenated with one-hot categoricals,
/// passed through hidden dense layers and a two-way softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNetClassifier {
    pub encoder: RecordEncoder,
    pub embedding: EmbeddingModel,
    pub categories: CategoryEncoder,
    pub standardizer: Standardizer,
    pub layers: Vec<Layer>,
    pub params: DenseParams,
    pub loss_by_epoch: Vec<f64>,
}

impl DenseNetClassifier {
    /// Untrained network with He-initialized weights.
    pub fn initialize(
        encoder: RecordEncoder,
        embedding: EmbeddingModel,
        categories: CategoryEncoder,
        params: &DenseParams,
    ) -> Result<Self, ClassifierError> {
        if params.hidden.contains(&0) {
            return Err(ClassifierError::InvalidConfig("hidden layer sizes must be positive".into()));
        }
        let input = embedding.dims() + categories.width;
        let mut rng = seeded(params.seed);
        let mut sizes = vec![input];
        sizes.extend(&params.hidden);
        sizes.push(2);
        let layers = sizes.windows(2).map(|w| Layer::he(w[0], w[1], &mut rng)).collect();
        Ok(DenseNetClassifier {
            encoder,
            standardizer: Standardizer::identity(embedding.dims()),
            embedding,
            categories,
            layers,
            params: params.clone(),
            loss_by_epoch: Vec::new(),
        })
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    fn raw_text_vector(&self, record: &CheckRecord) -> Vec<f64> {
        doc_vector(&self.encoder.text_tokens(record), &self.embedding).0
    }

    /// Network input for one record.
    pub fn features(&self, record: &CheckRecord) -> Vec<f64> {
        let mut x = self.raw_text_vector(record);
        self.standardizer.apply(&mut x);
        x.extend(self.categories.encode_dense(record));
        x
    }

    /// Class probabilities in (fail, pass) order for a prepared input.
    pub fn forward(&self, x: &[f64]) -> [f64; 2] {
        let mut a = x.to_vec();
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.forward(&a, &mut z);
            if l < last {
                a = z.iter().map(|&v| self.params.activation.apply(v)).collect();
            } else {
                a = z.clone();
            }
        }
        softmax_in_place(&mut a);
        [a[0], a[1]]
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All weights and biases, layer by layer.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            p.extend(&l.weights);
            p.extend(&l.bias);
        }
        p
    }

    pub fn set_parameters(&mut self, p: &[f64]) -> Result<(), ClassifierError> {
        if p.len() != self.parameter_count() {
            return Err(ClassifierError::LengthMismatch { what: "parameters", left: p.len(), right: self.parameter_count() });
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&p[off..off + nw]);
            off += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&p[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    /// Weighted mean cross-entropy over a batch.
    pub fn batch_loss(&self, xs: &[Vec<f64>], ys: &[Status], ws: &[f64]) -> f64 {
        let mut loss = 0.0;
        for ((x, &y), &w) in xs.iter().zip(ys).zip(ws) {
            let p = self.forward(x);
            loss -= w * p[class_index(y)].max(f64::MIN_POSITIVE).ln();
        }
        loss / xs.len().max(1) as f64
    }

    /// Backpropagated gradient of [`batch_loss`](Self::batch_loss), in [`parameters`](Self::parameters) order.
    pub fn batch_gradient(&self, xs: &[Vec<f64>], ys: &[Status], ws: &[f64]) -> (f64, Vec<f64>) {
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> =
            self.layers.iter().map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()])).collect();
        let scale = 1.0 / xs.len().max(1) as f64;
        let last = self.layers.len() - 1;
        let act = self.params.activation;
        let mut loss = 0.0;

        for ((x, &y), &w) in xs.iter().zip(ys).zip(ws) {
            // forward, keeping every layer's input and pre-activation
            let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
            let mut pre: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
            let mut a = x.clone();
            for (l, layer) in self.layers.iter().enumerate() {
                let mut z = Vec::new();
                layer.forward(&a, &mut z);
                let next = if l < last { z.iter().map(|&v| act.apply(v)).collect() } else { z.clone() };
                inputs.push(std::mem::replace(&mut a, next));
                pre.push(z);
            }
            softmax_in_place(&mut a);
            let yi = class_index(y);
            loss -= w * a[yi].max(f64::MIN_POSITIVE).ln();

            let mut delta: Vec<f64> =
                a.iter().enumerate().map(|(k, &p)| w * scale * (p - if k == yi { 1.0 } else { 0.0 })).collect();
            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let (gw, gb) = &mut grads[l];
                let input = &inputs[l];
                for o in 0..layer.outputs {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for (g, &v) in gw[o * layer.inputs..(o + 1) * layer.inputs].iter_mut().zip(input) {
                        *g += d * v;
                    }
                }
                if l > 0 {
                    let mut back = vec![0.0; layer.inputs];
                    for o in 0..layer.outputs {
                        let d = delta[o];
                        if d == 0.0 {
                            continue;
                        }
                        for (b, &wv) in back.iter_mut().zip(&layer.weights[o * layer.inputs..(o + 1) * layer.inputs]) {
                            *b += d * wv;
                        }
                    }
                    for (b, &z) in back.iter_mut().zip(&pre[l - 1]) {
                        *b *= act.derivative(z);
                    }
                    delta = back;
                }
            }
        }

        let mut flat = Vec::with_capacity(self.parameter_count());
        for (gw, gb) in grads {
            flat.extend(gw);
            flat.extend(gb);
        }
        (loss * scale, flat)
    }

    fn step(&mut self, grad: &[f64], lr: f64) {
        let mut off = 0;
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w -= lr * grad[off];
                off += 1;
            }
        }
    }
}

impl PassProbability for DenseNetClassifier {
    fn predict_proba(&self, record: &CheckRecord) -> f64 {
        self.forward(&self.features(record))[1]
    }
}

/// Minibatch SGD on weighted cross-entropy; the embedding stays frozen.
pub fn train_dense_net(
    records: &[CheckRecord],
    labels: &[Status],
    weights: Option<&[f64]>,
    encoder: RecordEncoder,
    embedding: EmbeddingModel,
    params: &DenseParams,
) -> Result<DenseNetClassifier, ClassifierError> {
    let n = check_training_inputs(records, labels)?;
    let w = normalized_weights(weights, n)?;
    if params.batch_size == 0 {
        return Err(ClassifierError::InvalidConfig("batch size must be positive".into()));
    }
    let categories = CategoryEncoder::fit(records, &encoder.features);
    let mut net = DenseNetClassifier::initialize(encoder, embedding, categories, params)?;

    let raw: Vec<Vec<f64>> = records.iter().map(|r| net.raw_text_vector(r)).collect();
    net.standardizer = Standardizer::fit(&raw, net.embedding.dims());
    let xs: Vec<Vec<f64>> = records.iter().map(|r| net.features(r)).collect();

    let mut rng = seeded(crate::rng::derive_seed(params.seed, 1));
    let mut order: Vec<usize> = (0..n).collect();
    let batches_per_epoch = n.div_ceil(params.batch_size);
    let total = (params.epochs * batches_per_epoch).max(1) as f64;
    let mut step = 0usize;
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(params.batch_size) {
            let bx: Vec<Vec<f64>> = chunk.iter().map(|&i| xs[i].clone()).collect();
            let by: Vec<Status> = chunk.iter().map(|&i| labels[i]).collect();
            let bw: Vec<f64> = chunk.iter().map(|&i| w[i]).collect();
            let (loss, grad) = net.batch_gradient(&bx, &by, &bw);
            epoch_loss += loss * chunk.len() as f64;
            let lr = params.lr * (1.0 - step as f64 / total).max(1e-4);
            step += 1;
            net.step(&grad, lr);
        }
        let loss = epoch_loss / n as f64;
        if !loss.is_finite() {
            return Err(ClassifierError::NonFiniteLoss { epoch });
        }
        net.loss_by_epoch.push(loss);
    }
    Ok(net)
}
