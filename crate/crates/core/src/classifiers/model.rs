use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dense::{train_dense_net, DenseNetClassifier, DenseParams};
use super::features::{FeatureSet, RecordEncoder};
use super::forest::{train_random_forest, ForestParams, RandomForestClassifier};
use super::linear::{train_softmax_classifier, SoftmaxClassifier, SoftmaxParams};
use super::{training_labels, ClassifierError, PassProbability};
use crate::corpus::{CheckRecord, LabelMode};
use crate::rng::derive_seed;
use crate::textprep::{TextPipeline, TokenList};
use crate::vectors::{train_embeddings, EmbeddingConfig, EmbeddingModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Linear softmax over averaged word vectors.
    Blazing,
    Dense,
    Forest,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Blazing, ModelKind::Dense, ModelKind::Forest];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Blazing => "blazing",
            ModelKind::Dense => "dense",
            ModelKind::Forest => "forest",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "blazing" | "softmax" | "linear" => Ok(ModelKind::Blazing),
            "dense" => Ok(ModelKind::Dense),
            "forest" | "random_forest" => Ok(ModelKind::Forest),
            other => Err(ClassifierError::InvalidConfig(format!("unknown model kind {other:?}"))),
        }
    }
}

/// Everything needed to fit any of the three models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub label_mode: LabelMode,
    pub features: FeatureSet,
    pub pipeline: TextPipeline,
    pub embedding: EmbeddingConfig,
    pub softmax: SoftmaxParams,
    pub dense: DenseParams,
    pub forest: ForestParams,
    /// Master seed; component seeds are derived from it.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            kind: ModelKind::Blazing,
            label_mode: LabelMode::Throttled,
            features: FeatureSet::default(),
            pipeline: TextPipeline::default(),
            embedding: EmbeddingConfig::default(),
            softmax: SoftmaxParams::default(),
            dense: DenseParams::default(),
            forest: ForestParams::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        TrainConfig { kind, seed, ..TrainConfig::default() }
    }

    fn hyperparams(&self) -> serde_json::Value {
        match self.kind {
            ModelKind::Blazing => serde_json::json!({ "embedding": self.embedding, "softmax": self.softmax }),
            ModelKind::Dense => serde_json::json!({ "embedding": self.embedding, "dense": self.dense }),
            ModelKind::Forest => serde_json::json!({ "forest": self.forest }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Blazing(SoftmaxClassifier),
    Dense(DenseNetClassifier),
    Forest(RandomForestClassifier),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Blazing(_) => ModelKind::Blazing,
            Model::Dense(_) => ModelKind::Dense,
            Model::Forest(_) => ModelKind::Forest,
        }
    }

    pub fn embedding(&self) -> Option<&EmbeddingModel> {
        match self {
            Model::Blazing(m) => Some(&m.embedding),
            Model::Dense(m) => Some(&m.embedding),
            Model::Forest(_) => None,
        }
    }
}

impl PassProbability for Model {
    fn predict_proba(&self, record: &CheckRecord) -> f64 {
        match self {
            Model::Blazing(m) => m.predict_proba(record),
            Model::Dense(m) => m.predict_proba(record),
            Model::Forest(m) => m.predict_proba(record),
        }
    }
}

fn embed_corpus(
    records: &[CheckRecord],
    tokens: impl Fn(&CheckRecord) -> Vec<String>,
    config: &EmbeddingConfig,
    seed: u64,
) -> Result<EmbeddingModel, ClassifierError> {
    let docs: Vec<TokenList> = records.iter().map(|r| TokenList::new(r.id.clone(), tokens(r))).collect();
    let cfg = EmbeddingConfig { seed, ..config.clone() };
    Ok(train_embeddings(&docs, &cfg)?)
}

/// Train the configured model on `records`, labelled under `config.label_mode`.
pub fn fit_classifier(
    records: &[CheckRecord],
    weights: Option<&[f64]>,
    config: &TrainConfig,
) -> Result<Model, ClassifierError> {
    let labels = training_labels(records, config.label_mode)?;
    let encoder = RecordEncoder::new(config.features.clone(), config.pipeline.clone());
    let seed = config.seed;
    Ok(match config.kind {
        ModelKind::Blazing => {
            let emb = embed_corpus(records, |r| encoder.token_stream(r), &config.embedding, derive_seed(seed, 10))?;
            let params = SoftmaxParams { seed: derive_seed(seed, 11), ..config.softmax.clone() };
            Model::Blazing(train_softmax_classifier(records, &labels, weights, encoder, emb, &params)?)
        }
        ModelKind::Dense => {
            let emb = embed_corpus(records, |r| encoder.text_tokens(r), &config.embedding, derive_seed(seed, 20))?;
            let params = DenseParams { seed: derive_seed(seed, 21), ..config.dense.clone() };
            Model::Dense(train_dense_net(records, &labels, weights, encoder, emb, &params)?)
        }
        ModelKind::Forest => {
            let params = ForestParams { seed: derive_seed(seed, 30), ..config.forest.clone() };
            Model::Forest(train_random_forest(records, &labels, weights, encoder, &params)?)
        }
    })
}

/// Self-describing JSON container for a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub kind: ModelKind,
    pub label_mode: LabelMode,
    pub features: FeatureSet,
    pub hyperparams: serde_json::Value,
    pub seed: u64,
    pub model: Model,
}

impl ModelFile {
    pub fn new(model: Model, config: &TrainConfig) -> Self {
        ModelFile {
            kind: model.kind(),
            label_mode: config.label_mode,
            features: config.features.clone(),
            hyperparams: config.hyperparams(),
            seed: config.seed,
            model,
        }
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), ClassifierError> {
        serde_json::to_writer(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self, ClassifierError> {
        let file: ModelFile = serde_json::from_reader(r)?;
        if file.kind != file.model.kind() {
            return Err(ClassifierError::InvalidConfig(format!(
                "header says {} but parameters are {}",
                file.kind,
                file.model.kind()
            )));
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifierError> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(f)
    }

    pub fn load(path: &Path) -> Result<Self, ClassifierError> {
        ModelFile::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
