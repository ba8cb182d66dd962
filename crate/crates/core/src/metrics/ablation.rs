use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{roc_auc, MetricError};
use crate::classifiers::{fit_classifier, training_labels, ClassifierError, FeatureSet, PassProbability, TrainConfig};
use crate::corpus::{split_train_test, CheckRecord, CorpusError, Stratify};

#[derive(Debug, Error)]
pub enum AblationError {
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub train: TrainConfig,
    pub train_fraction: f64,
    pub split_seed: u64,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig { train: TrainConfig::default(), train_fraction: 0.8, split_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub features: FeatureSet,
    pub auc: f64,
}

/// Test AUC of one model per feature subset, all on the same split and seed.
/// Rows are sorted by descending AUC; equal AUCs keep input order.
pub fn feature_ablation(
    records: &[CheckRecord],
    subsets: &[Vec<String>],
    config: &AblationConfig,
) -> Result<Vec<AblationRow>, AblationError> {
    let sets = subsets
        .iter()
        .map(|names| FeatureSet::parse(&names.iter().map(String::as_str).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>, _>>()?;
    let split = split_train_test(records, config.train_fraction, config.split_seed, Stratify::ByIoq)?;
    let test_labels = training_labels(&split.test, config.train.label_mode)?;

    let mut rows = sets
        .into_par_iter()
        .map(|features| {
            let train = TrainConfig { features: features.clone(), ..config.train.clone() };
            let model = fit_classifier(&split.train, None, &train)?;
            let auc = roc_auc(&model.predict_batch(&split.test), &test_labels)?;
            Ok(AblationRow { features, auc })
        })
        .collect::<Result<Vec<_>, AblationError>>()?;
    rows.sort_by(|a, b| b.auc.total_cmp(&a.auc));
    Ok(rows)
}

pub fn format_ablation(rows: &[AblationRow]) -> String {
    let names: Vec<String> = rows.iter().map(|r| r.features.names().join(" + ")).collect();
    let w = names.iter().map(String::len).max().unwrap_or(0).max("Features".len());
    let mut out = format!("{:<w$}  AUC\n", "Features");
    for (n, r) in names.iter().zip(rows) {
        out.push_str(&format!("{n:<w$}  {:.2}%\n", 100.0 * r.auc));
    }
    out
}
