//! Severity-risk scoring: cluster incident descriptions and measure how close each
//! check comes to any incident cluster.

mod kmeans;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CheckRecord, SeverityEvent};
use crate::rng::derive_seed;
use crate::textprep::{TextPipeline, TokenList};
use crate::vectors::{cosine_similarity, doc_vector, train_embeddings, EmbeddingConfig, EmbeddingModel, VectorError};

pub use kmeans::{choose_elbow, elbow_select, kmeans, kmeans_best, lloyd, ElbowResult, KMeansResult};

#[derive(Debug, Error)]
pub enum SeverityError {
    #[error("no vectors to cluster")]
    EmptyInput,
    #[error("k = {k} but only {distinct} distinct vectors")]
    InvalidK { k: usize, distinct: usize },
    #[error("k range {lo}..={hi} needs at least three values starting at 1 or more")]
    InvalidRange { lo: usize, hi: usize },
    #[error("vector of length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("event {0} has no tokens after normalization")]
    EmptyEvent(String),
    #[error("duplicate event id {0}")]
    DuplicateEvent(String),
    #[error("unknown aggregation {0:?}")]
    UnknownAggregation(String),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How per-centroid similarities combine into one score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Max,
    Mean,
}

impl FromStr for Aggregation {
    type Err = SeverityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "max" => Ok(Aggregation::Max),
            "mean" => Ok(Aggregation::Mean),
            other => Err(SeverityError::UnknownAggregation(other.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeverityConfig {
    pub pipeline: TextPipeline,
    pub embedding: EmbeddingConfig,
    pub k_min: usize,
    pub k_max: usize,
    /// Skip the elbow search and use this k.
    pub fixed_k: Option<usize>,
    pub restarts: usize,
    pub max_iter: usize,
    pub aggregation: Aggregation,
    pub seed: u64,
}

impl Default for SeverityConfig {
    fn default() -> Self {
        SeverityConfig {
            pipeline: TextPipeline::default(),
            embedding: EmbeddingConfig::default(),
            k_min: 1,
            k_max: 20,
            fixed_k: None,
            restarts: 5,
            max_iter: 300,
            aggregation: Aggregation::Max,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Event id to cluster index.
    pub assignments: BTreeMap<String, usize>,
    pub inertia_by_k: BTreeMap<usize, f64>,
    /// Mean event vector, subtracted before clustering and scoring.
    pub center: Vec<f64>,
    pub aggregation: Aggregation,
    pub pipeline: TextPipeline,
    pub embedding: EmbeddingModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityScore {
    pub check_id: String,
    pub score: f64,
    pub nearest_cluster: usize,
}

/// Throttling is permitted only strictly below the threshold.
pub fn severity_gate(score: f64, t: f64) -> bool {
    score < t
}

fn event_docs(events: &[SeverityEvent], pipeline: &TextPipeline) -> Result<Vec<TokenList>, SeverityError> {
    let mut seen = std::collections::HashSet::new();
    events
        .iter()
        .map(|e| {
            if !seen.insert(e.id.as_str()) {
                return Err(SeverityError::DuplicateEvent(e.id.clone()));
            }
            let doc = pipeline.normalize_doc(&e.id, &e.description);
            if doc.is_empty() {
                return Err(SeverityError::EmptyEvent(e.id.clone()));
            }
            Ok(doc)
        })
        .collect()
}

impl SeverityModel {
    /// Train embeddings on the event descriptions, then cluster them.
    pub fn fit(events: &[SeverityEvent], config: &SeverityConfig) -> Result<Self, SeverityError> {
        if events.is_empty() {
            return Err(SeverityError::EmptyInput);
        }
        let docs = event_docs(events, &config.pipeline)?;
        let emb_cfg = EmbeddingConfig { seed: derive_seed(config.seed, 40), ..config.embedding.clone() };
        let embedding = train_embeddings(&docs, &emb_cfg)?;
        Self::fit_with_embedding(events, embedding, config)
    }

    /// Cluster events with an already trained embedding.
    pub fn fit_with_embedding(
        events: &[SeverityEvent],
        embedding: EmbeddingModel,
        config: &SeverityConfig,
    ) -> Result<Self, SeverityError> {
        if events.is_empty() {
            return Err(SeverityError::EmptyInput);
        }
        let docs = event_docs(events, &config.pipeline)?;
        let raw: Vec<Vec<f64>> = docs.iter().map(|d| doc_vector(&d.tokens, &embedding).0).collect();
        // Averaged word vectors share a common direction that would push every cosine towards 1.
        let dims = embedding.dims();
        let mut center = vec![0.0; dims];
        for v in &raw {
            for (c, x) in center.iter_mut().zip(v) {
                *c += x;
            }
        }
        center.iter_mut().for_each(|c| *c /= raw.len() as f64);
        let vectors: Vec<Vec<f64>> = raw.iter().map(|v| v.iter().zip(&center).map(|(x, c)| x - c).collect()).collect();
        let seed = derive_seed(config.seed, 41);
        let (run, inertia_by_k) = match config.fixed_k {
            Some(k) => {
                let run = kmeans_best(&vectors, k, seed, config.max_iter, config.restarts, None)?;
                let curve = BTreeMap::from([(k, run.inertia)]);
                (run, curve)
            }
            None => {
                let elbow = elbow_select(&vectors, config.k_min..=config.k_max, seed, config.max_iter, config.restarts)?;
                let run = elbow.run_for(elbow.chosen_k).expect("chosen k was fitted").clone();
                (run, elbow.curve.into_iter().collect())
            }
        };
        let assignments = events.iter().zip(&run.assignments).map(|(e, &c)| (e.id.clone(), c)).collect();
        Ok(SeverityModel {
            k: run.k,
            centroids: run.centroids,
            assignments,
            inertia_by_k,
            center,
            aggregation: config.aggregation,
            pipeline: config.pipeline.clone(),
            embedding,
        })
    }

    pub fn score_text(&self, check_id: &str, text: &str) -> SeverityScore {
        let tokens = self.pipeline.normalize(text).tokens;
        let v = doc_vector(&tokens, &self.embedding);
        let sims: Vec<f64> = if v.is_zero() {
            vec![0.0; self.centroids.len()]
        } else {
            let centered: Vec<f64> = v.0.iter().zip(&self.center).map(|(x, c)| x - c).collect();
            self.centroids
                .iter()
                .map(|c| cosine_similarity(&centered, c).expect("centroids share the embedding dimension").clamp(0.0, 1.0))
                .collect()
        };
        let mut nearest = 0;
        for (i, &s) in sims.iter().enumerate() {
            if s > sims[nearest] {
                nearest = i;
            }
        }
        let score = match self.aggregation {
            Aggregation::Max => sims[nearest],
            Aggregation::Mean => sims.iter().sum::<f64>() / sims.len() as f64,
        };
        SeverityScore { check_id: check_id.to_string(), score, nearest_cluster: nearest }
    }

    pub fn score_all(&self, records: &[CheckRecord]) -> Vec<SeverityScore> {
        records.par_iter().map(|r| severity_score(r, self)).collect()
    }

    /// Header line of config as JSON, then one `c<i> x1 .. xD` line per centroid.
    pub fn write_centroids<W: Write>(&self, mut w: W) -> Result<(), SeverityError> {
        let header = serde_json::json!({
            "k": self.k,
            "dims": self.centroids.first().map_or(0, Vec::len),
            "aggregation": self.aggregation,
            "inertia_by_k": self.inertia_by_k,
        });
        writeln!(w, "{header}")?;
        for (i, c) in self.centroids.iter().enumerate() {
            write!(w, "c{i}")?;
            for x in c {
                write!(w, " {x:?}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn inertia_csv(&self) -> String {
        let mut out = String::from("k,inertia\n");
        for (k, i) in &self.inertia_by_k {
            out.push_str(&format!("{k},{i:?}\n"));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), SeverityError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self, SeverityError> {
        Ok(serde_json::from_reader(r)?)
    }

    pub fn load(path: &Path) -> Result<Self, SeverityError> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Similarity of a check's checklist and focus-point text to the nearest incident cluster.
pub fn severity_score(check: &CheckRecord, model: &SeverityModel) -> SeverityScore {
    model.score_text(&check.id, &check.combined_text())
}
