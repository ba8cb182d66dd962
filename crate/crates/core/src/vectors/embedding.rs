//! Skip-gram word embeddings trained with negative sampling.
//!
//! Each (center, context) pair inside a randomly shrunk window contributes
//! `-log σ(u_c·v_w) - Σ_neg log σ(-u_n·v_w)`, with negatives drawn from the
//! unigram distribution raised to 3/4. The learning rate decays linearly to
//! 1e-4 of its initial value over all epochs.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::VectorError;
use crate::rng::seeded;
use crate::textprep::{build_vocabulary, TokenList, Vocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub dims: usize,
    pub window: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub negatives: usize,
    pub min_count: u64,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig { dims: 50, window: 5, epochs: 5, learning_rate: 0.05, negatives: 5, min_count: 1, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    vocabulary: Vocabulary,
    dims: usize,
    /// Row-major V × D input vectors.
    matrix: Vec<f64>,
    config: EmbeddingConfig,
    /// Mean per-pair objective of each epoch.
    loss_by_epoch: Vec<f64>,
}

impl EmbeddingModel {
    /// Assemble a model from explicit vectors, one row per vocabulary entry.
    pub fn from_rows(vocabulary: Vocabulary, rows: Vec<Vec<f64>>, config: EmbeddingConfig) -> Result<Self, VectorError> {
        if rows.len() != vocabulary.len() {
            return Err(VectorError::DimensionMismatch { left: vocabulary.len(), right: rows.len() });
        }
        let dims = rows.first().map(Vec::len).unwrap_or(config.dims);
        if dims < 2 {
            return Err(VectorError::DimsTooSmall(dims));
        }
        let mut matrix = Vec::with_capacity(rows.len() * dims);
        for r in &rows {
            if r.len() != dims {
                return Err(VectorError::DimensionMismatch { left: dims, right: r.len() });
            }
            matrix.extend_from_slice(r);
        }
        Ok(EmbeddingModel { vocabulary, dims, matrix, config: EmbeddingConfig { dims, ..config }, loss_by_epoch: vec![] })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn config(&self) -> &EmbeddingConfig {
        &self.config
    }

    pub fn loss_by_epoch(&self) -> &[f64] {
        &self.loss_by_epoch
    }

    /// Mean objective over the last epoch.
    pub fn final_loss(&self) -> Option<f64> {
        self.loss_by_epoch.last().copied()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.matrix[index * self.dims..(index + 1) * self.dims]
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.vocabulary.index_of(token).map(|i| self.row(i))
    }

    /// Header line (JSON) followed by one `token v1 .. vD` line per word.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<(), VectorError> {
        let header = Header {
            vocab_size: self.vocabulary.len(),
            dims: self.dims,
            seed: self.config.seed,
            config: self.config.clone(),
            frequencies: self.vocabulary.frequencies().to_vec(),
            loss_by_epoch: self.loss_by_epoch.clone(),
        };
        serde_json::to_writer(&mut w, &header).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
        for (i, token) in self.vocabulary.tokens().iter().enumerate() {
            write!(w, "{token}")?;
            for x in self.row(i) {
                // `{:?}` on f64 prints the shortest decimal that parses back to the same bits.
                write!(w, " {x:?}")?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self, VectorError> {
        let mut lines = r.lines();
        let header_line = lines.next().ok_or(VectorError::Format { line: 1, message: "empty file".into() })??;
        let header: Header = serde_json::from_str(&header_line)
            .map_err(|e| VectorError::Format { line: 1, message: e.to_string() })?;
        let mut tokens = Vec::with_capacity(header.vocab_size);
        let mut matrix = Vec::with_capacity(header.vocab_size * header.dims);
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            let token = parts.next().unwrap_or_default().to_string();
            let before = matrix.len();
            for p in parts {
                let x: f64 = p.parse().map_err(|e| VectorError::Format { line: line_no, message: format!("{e}") })?;
                matrix.push(x);
            }
            if matrix.len() - before != header.dims {
                return Err(VectorError::Format {
                    line: line_no,
                    message: format!("expected {} values, got {}", header.dims, matrix.len() - before),
                });
            }
            tokens.push(token);
        }
        if tokens.len() != header.vocab_size || header.frequencies.len() != tokens.len() {
            return Err(VectorError::Format {
                line: 1,
                message: format!("header declares {} words, file has {}", header.vocab_size, tokens.len()),
            });
        }
        let vocabulary: Vocabulary = serde_json::from_value(serde_json::json!({
            "min_count": header.config.min_count,
            "tokens": tokens,
            "frequencies": header.frequencies,
        }))
        .map_err(|e| VectorError::Format { line: 1, message: e.to_string() })?;
        Ok(EmbeddingModel {
            vocabulary,
            dims: header.dims,
            matrix,
            config: header.config,
            loss_by_epoch: header.loss_by_epoch,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    #[serde(rename = "V")]
    vocab_size: usize,
    #[serde(rename = "D")]
    dims: usize,
    config: EmbeddingConfig,
    seed: u64,
    frequencies: Vec<u64>,
    loss_by_epoch: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln σ(x)` without overflow.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Cumulative unigram^0.75 distribution for negative draws.
struct NegativeSampler {
    cumulative: Vec<f64>,
}

impl NegativeSampler {
    fn new(vocab: &Vocabulary) -> Self {
        let mut acc = 0.0;
        let cumulative = vocab
            .frequencies()
            .iter()
            .map(|&f| {
                acc += (f as f64).powf(0.75);
                acc
            })
            .collect();
        NegativeSampler { cumulative }
    }

    fn sample(&self, rng: &mut crate::rng::Rng) -> usize {
        let total = *self.cumulative.last().unwrap();
        let u = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

pub fn train_embeddings(corpus: &[TokenList], config: &EmbeddingConfig) -> Result<EmbeddingModel, VectorError> {
    if config.dims < 2 {
        return Err(VectorError::DimsTooSmall(config.dims));
    }
    let vocabulary = build_vocabulary(corpus.iter().map(|d| d.tokens.as_slice()), config.min_count)?;
    if vocabulary.len() < 2 {
        return Err(VectorError::VocabularyTooSmall(vocabulary.len()));
    }
    let docs: Vec<Vec<usize>> = corpus
        .iter()
        .map(|d| d.tokens.iter().filter_map(|t| vocabulary.index_of(t)).collect::<Vec<_>>())
        .filter(|d| d.len() >= 2)
        .collect();
    let window = config.window.max(1);
    if docs.is_empty() {
        return Err(VectorError::NoContextPairs);
    }

    let dims = config.dims;
    let v = vocabulary.len();
    let mut rng = seeded(config.seed);
    let mut input: Vec<f64> = (0..v * dims).map(|_| (rng.gen::<f64>() - 0.5) / dims as f64).collect();
    let mut output = vec![0.0; v * dims];
    let sampler = NegativeSampler::new(&vocabulary);

    let tokens_per_epoch: usize = docs.iter().map(Vec::len).sum();
    let total_steps = (tokens_per_epoch * config.epochs).max(1) as f64;
    let mut step = 0usize;
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let mut grad = vec![0.0; dims];
    let mut loss_by_epoch = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut pairs) = (0.0, 0usize);
        for &d in &order {
            let doc = &docs[d];
            for (t, &center) in doc.iter().enumerate() {
                let lr = config.learning_rate * (1.0 - step as f64 / total_steps).max(1e-4);
                step += 1;
                let reach = rng.gen_range(1..=window);
                let lo = t.saturating_sub(reach);
                let hi = (t + reach).min(doc.len() - 1);
                for c in lo..=hi {
                    if c == t {
                        continue;
                    }
                    let context = doc[c];
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let vin = &input[center * dims..(center + 1) * dims];
                    let mut pair_loss = 0.0;
                    for k in 0..=config.negatives {
                        let (target, label) = if k == 0 {
                            (context, 1.0)
                        } else {
                            let mut n = sampler.sample(&mut rng);
                            if n == context {
                                n = sampler.sample(&mut rng);
                                if n == context {
                                    continue;
                                }
                            }
                            (n, 0.0)
                        };
                        let out = &mut output[target * dims..(target + 1) * dims];
                        let score: f64 = vin.iter().zip(out.iter()).map(|(a, b)| a * b).sum();
                        pair_loss += if label > 0.0 { neg_log_sigmoid(score) } else { neg_log_sigmoid(-score) };
                        let g = lr * (label - sigmoid(score));
                        for ((gi, o), &x) in grad.iter_mut().zip(out.iter_mut()).zip(vin) {
                            *gi += g * *o;
                            *o += g * x;
                        }
                    }
                    for (x, g) in input[center * dims..(center + 1) * dims].iter_mut().zip(&grad) {
                        *x += g;
                    }
                    loss_sum += pair_loss;
                    pairs += 1;
                }
            }
        }
        let mean = if pairs > 0 { loss_sum / pairs as f64 } else { 0.0 };
        if !mean.is_finite() {
            return Err(VectorError::NonFinite { epoch });
        }
        loss_by_epoch.push(mean);
    }

    Ok(EmbeddingModel { vocabulary, dims, matrix: input, config: config.clone(), loss_by_epoch })
}
