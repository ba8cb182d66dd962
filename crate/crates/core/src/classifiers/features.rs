use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::corpus::CheckRecord;
use crate::textprep::{build_vocabulary, TextPipeline, Vocabulary};

/// A record field usable as classifier input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Checklist,
    FocusPoints,
    AssetType,
    Vendor,
    Criticality,
    Site,
    SeverityGroup,
}

impl Feature {
    pub const ALL: [Feature; 7] = [
        Feature::Checklist,
        Feature::FocusPoints,
        Feature::AssetType,
        Feature::Vendor,
        Feature::Criticality,
        Feature::Site,
        Feature::SeverityGroup,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Checklist => "checklist",
            Feature::FocusPoints => "focus_points",
            Feature::AssetType => "asset_type",
            Feature::Vendor => "vendor",
            Feature::Criticality => "criticality",
            Feature::Site => "site",
            Feature::SeverityGroup => "severity_group",
        }
    }

    pub fn is_text(self) -> bool {
        matches!(self, Feature::Checklist | Feature::FocusPoints)
    }

    /// Raw field value; missing categoricals read as empty.
    pub fn value(self, r: &CheckRecord) -> &str {
        match self {
            Feature::Checklist => &r.checklist_text,
            Feature::FocusPoints => &r.focus_points,
            Feature::AssetType => &r.asset_type,
            Feature::Vendor => &r.vendor,
            Feature::Criticality => &r.criticality,
            Feature::Site => r.site.as_deref().unwrap_or(""),
            Feature::SeverityGroup => r.severity_group.as_deref().unwrap_or(""),
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let alias = match s {
            "checklist_text" => "checklist",
            "focus_point" => "focus_points",
            other => other,
        };
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == alias)
            .ok_or_else(|| ClassifierError::UnknownFeature(s.to_string()))
    }
}

/// Ordered, duplicate-free set of input fields.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Feature>", into = "Vec<Feature>")]
pub struct FeatureSet(Vec<Feature>);

impl FeatureSet {
    pub fn new(features: impl IntoIterator<Item = Feature>) -> Result<Self, ClassifierError> {
        let mut v: Vec<Feature> = features.into_iter().collect();
        v.sort();
        v.dedup();
        if v.is_empty() {
            return Err(ClassifierError::EmptyFeatureSet);
        }
        Ok(FeatureSet(v))
    }

    pub fn parse(names: &[&str]) -> Result<Self, ClassifierError> {
        FeatureSet::new(names.iter().map(|n| n.parse()).collect::<Result<Vec<_>, _>>()?)
    }

    pub fn features(&self) -> &[Feature] {
        &self.0
    }

    pub fn text(&self) -> impl Iterator<Item = Feature> + '_ {
        self.0.iter().copied().filter(|f| f.is_text())
    }

    pub fn categorical(&self) -> impl Iterator<Item = Feature> + '_ {
        self.0.iter().copied().filter(|f| !f.is_text())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.0.iter().map(|f| f.name()).collect()
    }
}

impl Default for FeatureSet {
    /// Checklist, focus points, asset type, vendor and criticality.
    fn default() -> Self {
        FeatureSet(vec![Feature::Checklist, Feature::FocusPoints, Feature::AssetType, Feature::Vendor, Feature::Criticality])
    }
}

impl TryFrom<Vec<Feature>> for FeatureSet {
    type Error = ClassifierError;

    fn try_from(v: Vec<Feature>) -> Result<Self, Self::Error> {
        FeatureSet::new(v)
    }
}

impl From<FeatureSet> for Vec<Feature> {
    fn from(s: FeatureSet) -> Self {
        s.0
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.names().join(", "))
    }
}

fn category_key(value: &str) -> String {
    value.trim().to_lowercase().split_whitespace().collect::<Vec<_>>().join("_")
}

/// Turns records into token streams and categorical indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEncoder {
    pub features: FeatureSet,
    pub pipeline: TextPipeline,
}

impl RecordEncoder {
    pub fn new(features: FeatureSet, pipeline: TextPipeline) -> Self {
        RecordEncoder { features, pipeline }
    }

    /// Normalized tokens of one text field.
    pub fn field_tokens(&self, record: &CheckRecord, feature: Feature) -> Vec<String> {
        if feature.is_text() {
            self.pipeline.normalize(feature.value(record)).tokens
        } else {
            let key = category_key(feature.value(record));
            if key.is_empty() {
                vec![]
            } else {
                vec![format!("{}={key}", feature.name())]
            }
        }
    }

    /// All selected fields as one token stream; categoricals become `field=value` tokens.
    pub fn token_stream(&self, record: &CheckRecord) -> Vec<String> {
        self.features.features().iter().flat_map(|&f| self.field_tokens(record, f)).collect()
    }

    /// Text fields only.
    pub fn text_tokens(&self, record: &CheckRecord) -> Vec<String> {
        self.features.text().flat_map(|f| self.field_tokens(record, f)).collect()
    }
}

/// One-hot positions for each categorical field value seen in training.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CategoryEncoder {
    /// (feature, value → offset) in feature order; offsets are global and dense.
    pub columns: Vec<(Feature, BTreeMap<String, usize>)>,
    pub width: usize,
}

impl CategoryEncoder {
    pub fn fit(records: &[CheckRecord], features: &FeatureSet) -> Self {
        let mut columns = Vec::new();
        let mut width = 0;
        for f in features.categorical() {
            let mut values: Vec<String> = records.iter().map(|r| category_key(f.value(r))).collect();
            values.sort();
            values.dedup();
            let map: BTreeMap<String, usize> = values
                .into_iter()
                .map(|v| {
                    width += 1;
                    (v, width - 1)
                })
                .collect();
            columns.push((f, map));
        }
        CategoryEncoder { columns, width }
    }

    /// Active one-hot offsets for `record`; unseen values activate nothing.
    pub fn active(&self, record: &CheckRecord) -> Vec<usize> {
        self.columns.iter().filter_map(|(f, map)| map.get(&category_key(f.value(record))).copied()).collect()
    }

    pub fn encode_dense(&self, record: &CheckRecord) -> Vec<f64> {
        let mut v = vec![0.0; self.width];
        for i in self.active(record) {
            v[i] = 1.0;
        }
        v
    }
}

/// Count features over the most frequent words of each text field plus one-hot categoricals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopWordsEncoder {
    pub encoder: RecordEncoder,
    pub text_vocab: Vec<(Feature, Vocabulary)>,
    pub categories: CategoryEncoder,
    pub width: usize,
}

impl TopWordsEncoder {
    pub fn fit(records: &[CheckRecord], encoder: RecordEncoder, top_words: usize) -> Result<Self, ClassifierError> {
        let mut text_vocab = Vec::new();
        let mut width = 0;
        for f in encoder.features.text() {
            let docs: Vec<Vec<String>> = records.iter().map(|r| encoder.field_tokens(r, f)).collect();
            match build_vocabulary(docs.iter().map(Vec::as_slice), 1) {
                Ok(v) => {
                    let v = v.truncated(top_words);
                    width += v.len();
                    text_vocab.push((f, v));
                }
                Err(crate::textprep::TextError::EmptyCorpus) => continue,
                Err(e) => return Err(e.into()),
            }
        }
        let categories = CategoryEncoder::fit(records, &encoder.features);
        width += categories.width;
        if width == 0 {
            return Err(ClassifierError::EmptyFeatureMatrix);
        }
        Ok(TopWordsEncoder { encoder, text_vocab, categories, width })
    }

    /// Sparse `(column, count)` pairs, sorted by column.
    pub fn encode(&self, record: &CheckRecord) -> Vec<(u32, u16)> {
        let mut out: Vec<(u32, u16)> = Vec::new();
        let mut offset = 0usize;
        for (f, vocab) in &self.text_vocab {
            let mut counts: BTreeMap<usize, u16> = BTreeMap::new();
            for t in self.encoder.field_tokens(record, *f) {
                if let Some(i) = vocab.index_of(&t) {
                    let c = counts.entry(i).or_default();
                    *c = c.saturating_add(1);
                }
            }
            out.extend(counts.into_iter().map(|(i, c)| ((offset + i) as u32, c)));
            offset += vocab.len();
        }
        let mut cats = self.categories.active(record);
        cats.sort_unstable();
        out.extend(cats.into_iter().map(|i| ((offset + i) as u32, 1)));
        out
    }

    pub fn column_name(&self, column: usize) -> String {
        let mut offset = 0;
        for (f, vocab) in &self.text_vocab {
            if column < offset + vocab.len() {
                return format!("{}:{}", f.name(), vocab.token(column - offset));
            }
            offset += vocab.len();
        }
        for (f, map) in &self.categories.columns {
            if let Some((v, _)) = map.iter().find(|(_, &i)| offset + i == column) {
                return format!("{}={v}", f.name());
            }
        }
        format!("#{column}")
    }
}
