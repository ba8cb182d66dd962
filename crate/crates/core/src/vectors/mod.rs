//! Count vectors, word embeddings, document vectors and cosine similarity.

mod embedding;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textprep::{TextError, Vocabulary};

pub use embedding::{train_embeddings, EmbeddingConfig, EmbeddingModel};

#[derive(Debug, Error)]
pub enum VectorError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("embedding dimension must be at least 2, got {0}")]
    DimsTooSmall(usize),
    #[error("vocabulary has {0} tokens, need at least 2")]
    VocabularyTooSmall(usize),
    #[error("corpus has no (center, context) pair inside the window")]
    NoContextPairs,
    #[error("training diverged: non-finite loss in epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("malformed embedding file at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sparse nonnegative counts over a vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseVector {
    dimension: usize,
    entries: Vec<(u32, u32)>,
}

impl SparseVector {
    /// Build from `(index, count)` pairs in any order; zero counts are dropped, repeats summed.
    pub fn from_pairs(dimension: usize, mut pairs: Vec<(u32, u32)>) -> Self {
        pairs.sort_unstable_by_key(|p| p.0);
        let mut entries: Vec<(u32, u32)> = Vec::with_capacity(pairs.len());
        for (i, c) in pairs {
            assert!((i as usize) < dimension, "index {i} out of dimension {dimension}");
            if c == 0 {
                continue;
            }
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => entries.push((i, c)),
            }
        }
        SparseVector { dimension, entries }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: u32) -> u32 {
        self.entries.binary_search_by_key(&index, |e| e.0).map(|p| self.entries[p].1).unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.1 as u64).sum()
    }

    pub fn squared_norm(&self) -> u64 {
        self.entries.iter().map(|e| (e.1 as u64) * (e.1 as u64)).sum()
    }

    pub fn dot(&self, other: &SparseVector) -> u64 {
        let (mut i, mut j, mut acc) = (0, 0, 0u64);
        while i < self.entries.len() && j < other.entries.len() {
            let (a, b) = (self.entries[i], other.entries[j]);
            match a.0.cmp(&b.0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a.1 as u64 * b.1 as u64;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// Cosine over integer counts; exactly 1 for identical nonzero vectors, 0 if either is zero.
    pub fn cosine(&self, other: &SparseVector) -> Result<f64, VectorError> {
        if self.dimension != other.dimension {
            return Err(VectorError::DimensionMismatch { left: self.dimension, right: other.dimension });
        }
        let (na, nb) = (self.squared_norm(), other.squared_norm());
        if na == 0 || nb == 0 {
            return Ok(0.0);
        }
        let denom = ((na as f64) * (nb as f64)).sqrt();
        Ok((self.dot(other) as f64 / denom).min(1.0))
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dimension];
        for &(i, c) in &self.entries {
            v[i as usize] = c as f64;
        }
        v
    }
}

/// Count each in-vocabulary token; unknown tokens are ignored.
pub fn count_vectorize(tokens: &[String], vocab: &Vocabulary) -> SparseVector {
    let pairs = tokens.iter().filter_map(|t| vocab.index_of(t)).map(|i| (i as u32, 1)).collect();
    SparseVector::from_pairs(vocab.len(), pairs)
}

/// Finite dense vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DenseVector(pub Vec<f64>);

impl DenseVector {
    pub fn zeros(dims: usize) -> Self {
        DenseVector(vec![0.0; dims])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }
}

/// `a·b / (|a||b|)`, clamped to [-1, 1]; 0 when either vector is all zero.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, VectorError> {
    if a.len() != b.len() {
        return Err(VectorError::DimensionMismatch { left: a.len(), right: b.len() });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    // sqrt(x*x) == x exactly, so identical vectors score exactly 1.
    let mut denom = (na * nb).sqrt();
    if !denom.is_normal() {
        denom = na.sqrt() * nb.sqrt();
    }
    Ok((dot / denom).clamp(-1.0, 1.0))
}

/// Mean of the in-vocabulary word vectors; zero vector if none are known.
pub fn doc_vector(tokens: &[String], model: &EmbeddingModel) -> DenseVector {
    let dims = model.dims();
    let mut acc = vec![0.0; dims];
    let mut n = 0usize;
    for t in tokens {
        if let Some(row) = model.vector(t) {
            for (a, &x) in acc.iter_mut().zip(row) {
                *a += x;
            }
            n += 1;
        }
    }
    if n > 1 {
        let inv = n as f64;
        acc.iter_mut().for_each(|a| *a /= inv);
    }
    DenseVector(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::build_vocabulary;
    use proptest::prelude::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn count_vectorize_examples() {
        let vocab = build_vocabulary([strings(&["belt", "belt", "motor"]).as_slice()], 1).unwrap();
        let v = count_vectorize(&strings(&["belt", "belt", "motor"]), &vocab);
        assert_eq!(v.entries(), &[(0, 2), (1, 1)]);
        assert!(count_vectorize(&strings(&["guard", "fan"]), &vocab).is_zero());
        assert!(count_vectorize(&[], &vocab).is_zero());
        assert_eq!(v.dimension(), 2);
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
        assert!((cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 2.0]),
            Err(VectorError::DimensionMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn sparse_cosine_matches_dense() {
        let a = SparseVector::from_pairs(5, vec![(0, 1), (3, 2), (4, 1)]);
        let b = SparseVector::from_pairs(5, vec![(3, 1), (1, 1), (4, 4)]);
        let dense = cosine_similarity(&a.to_dense(), &b.to_dense()).unwrap();
        assert!((a.cosine(&b).unwrap() - dense).abs() < 1e-12);
        assert_eq!(a.cosine(&a).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn sparse_self_cosine_is_exactly_one(pairs in prop::collection::vec((0u32..50, 1u32..20), 1..30)) {
            let v = SparseVector::from_pairs(50, pairs);
            prop_assert_eq!(v.cosine(&v).unwrap(), 1.0);
        }

        #[test]
        fn count_sum_equals_known_tokens(doc in prop::collection::vec("[a-f]", 0..30)) {
            let vocab = build_vocabulary([strings(&["a", "b", "c"]).as_slice()], 1).unwrap();
            let v = count_vectorize(&doc, &vocab);
            let known = doc.iter().filter(|t| vocab.index_of(t).is_some()).count() as u64;
            prop_assert_eq!(v.total(), known);
        }

        #[test]
        fn cosine_symmetric_and_bounded(a in prop::collection::vec(-1e3f64..1e3, 8), b in prop::collection::vec(-1e3f64..1e3, 8), c in 1e-3f64..1e3) {
            let ab = cosine_similarity(&a, &b).unwrap();
            prop_assert_eq!(ab, cosine_similarity(&b, &a).unwrap());
            prop_assert!(ab.abs() <= 1.0 + 1e-12);
            let scaled: Vec<f64> = a.iter().map(|x| x * c).collect();
            prop_assert!((cosine_similarity(&scaled, &b).unwrap() - ab).abs() < 1e-9);
        }
    }
}
