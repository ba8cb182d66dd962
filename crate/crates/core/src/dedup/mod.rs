//! Near-duplicate detection within blocks of checks that share asset type, vendor and site.

mod report;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CheckRecord;
use crate::textprep::{build_vocabulary, TextPipeline, TextError, TokenList, TypoFolder, Vocabulary};
use crate::vectors::{count_vectorize, SparseVector};

pub use report::{dedup_report, DedupReport, TierRow};

/// Stand-in for a missing site so siteless records only block with each other.
pub const MISSING_SITE: &str = "∅";

#[derive(Debug, Error)]
pub enum DedupError {
    #[error("records {a} and {b} are in different blocks")]
    CrossBlock { a: String, b: String },
    #[error("invalid tier bounds: {0}")]
    InvalidBounds(String),
    #[error("duplicate check id {0}")]
    DuplicateId(String),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockKey {
    pub asset_type: String,
    pub vendor: String,
    pub site: String,
}

fn norm_key(s: &str) -> String {
    s.trim().to_lowercase()
}

pub fn block_key(record: &CheckRecord) -> BlockKey {
    BlockKey {
        asset_type: norm_key(&record.asset_type),
        vendor: norm_key(&record.vendor),
        site: match record.site.as_deref().map(norm_key) {
            Some(s) if !s.is_empty() => s,
            _ => MISSING_SITE.to_string(),
        },
    }
}

/// Record positions grouped by block, blocks in key order, positions ascending.
pub fn blocks(records: &[CheckRecord]) -> BTreeMap<BlockKey, Vec<usize>> {
    let mut map: BTreeMap<BlockKey, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        map.entry(block_key(r)).or_default().push(i);
    }
    map
}

fn block_pairs(members: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    members.iter().enumerate().flat_map(move |(k, &i)| members[k + 1..].iter().map(move |&j| (i, j)))
}

/// Every unordered within-block pair exactly once.
pub fn pair_candidates(records: &[CheckRecord]) -> impl Iterator<Item = (&CheckRecord, &CheckRecord)> {
    let groups: Vec<Vec<usize>> = blocks(records).into_values().collect();
    (0..groups.len()).flat_map(move |g| {
        let members = groups[g].clone();
        let pairs: Vec<(usize, usize)> = block_pairs(&members).collect();
        pairs.into_iter().map(move |(i, j)| (&records[i], &records[j]))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tier {
    Moderate,
    High,
    Identical,
}

impl Tier {
    /// Highest first.
    pub const ALL: [Tier; 3] = [Tier::Identical, Tier::High, Tier::Moderate];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Identical => "Identical",
            Tier::High => "High",
            Tier::Moderate => "Moderate",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Tier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Tier::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown tier {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierBounds {
    pub identical_min: f64,
    pub high_min: f64,
    pub moderate_min: f64,
}

impl Default for TierBounds {
    fn default() -> Self {
        TierBounds { identical_min: 0.85, high_min: 0.60, moderate_min: 0.35 }
    }
}

impl TierBounds {
    pub fn validate(&self) -> Result<(), DedupError> {
        let TierBounds { identical_min: i, high_min: h, moderate_min: m } = *self;
        if 0.0 < m && m < h && h < i && i <= 1.0 {
            Ok(())
        } else {
            Err(DedupError::InvalidBounds(format!("need 0 < {m} < {h} < {i} <= 1")))
        }
    }
}

/// `[identical_min, 1]`, `[high_min, identical_min)`, `[moderate_min, high_min)`, else none.
pub fn classify_tier(similarity: f64, bounds: &TierBounds) -> Option<Tier> {
    if similarity >= bounds.identical_min {
        Some(Tier::Identical)
    } else if similarity >= bounds.high_min {
        Some(Tier::High)
    } else if similarity >= bounds.moderate_min {
        Some(Tier::Moderate)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    #[default]
    Pending,
    Accepted,
    Rejected,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Pending => "pending",
            Decision::Accepted => "accepted",
            Decision::Rejected => "rejected",
        }
    }
}

impl std::str::FromStr for Decision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pending" => Ok(Decision::Pending),
            "accepted" | "accept" => Ok(Decision::Accepted),
            "rejected" | "reject" => Ok(Decision::Rejected),
            other => Err(format!("unknown decision {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicatePair {
    /// Lexicographically smaller id.
    pub id_a: String,
    pub id_b: String,
    pub similarity: f64,
    pub tier: Tier,
    #[serde(default)]
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decided_by: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decided_at: Option<String>,
}

/// Fitted text basis: checklist text and focus points, normalized, typo-folded and counted.
#[derive(Debug, Clone, PartialEq)]
pub struct PairScorer {
    pub pipeline: TextPipeline,
    pub folder: TypoFolder,
    pub vocabulary: Option<Vocabulary>,
}

impl PairScorer {
    pub fn fit(records: &[CheckRecord], pipeline: TextPipeline) -> Self {
        let docs: Vec<TokenList> = records.iter().map(|r| pipeline.normalize(&r.combined_text())).collect();
        let folder = TypoFolder::fit(docs.iter().map(|d| d.tokens.as_slice()), pipeline.typo_min_freq);
        let folded: Vec<TokenList> = docs.iter().map(|d| folder.apply(d)).collect();
        let vocabulary = build_vocabulary(folded.iter().map(|d| d.tokens.as_slice()), 1).ok();
        PairScorer { pipeline, folder, vocabulary }
    }

    pub fn tokens(&self, record: &CheckRecord) -> Vec<String> {
        self.folder.apply(&self.pipeline.normalize(&record.combined_text())).tokens
    }

    pub fn vector(&self, record: &CheckRecord) -> SparseVector {
        match &self.vocabulary {
            Some(v) => count_vectorize(&self.tokens(record), v),
            None => SparseVector::from_pairs(0, vec![]),
        }
    }

    /// Count cosine of two same-block records.
    pub fn score_pair(&self, a: &CheckRecord, b: &CheckRecord) -> Result<f64, DedupError> {
        if block_key(a) != block_key(b) {
            return Err(DedupError::CrossBlock { a: a.id.clone(), b: b.id.clone() });
        }
        Ok(self.vector(a).cosine(&self.vector(b)).unwrap_or(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupResult {
    pub n_checks: usize,
    pub bounds: TierBounds,
    /// Pairs at or above `moderate_min`, by descending similarity then ids.
    pub pairs: Vec<DuplicatePair>,
}

pub(crate) fn sort_pairs(pairs: &mut [DuplicatePair]) {
    pairs.sort_by(|x, y| {
        y.similarity.total_cmp(&x.similarity).then_with(|| x.id_a.cmp(&y.id_a)).then_with(|| x.id_b.cmp(&y.id_b))
    });
}

/// Score every within-block pair and keep the tiered ones.
pub fn find_duplicates(records: &[CheckRecord], bounds: &TierBounds, pipeline: &TextPipeline) -> Result<DedupResult, DedupError> {
    bounds.validate()?;
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(DedupError::DuplicateId(r.id.clone()));
        }
    }
    let scorer = PairScorer::fit(records, pipeline.clone());
    let vectors: Vec<SparseVector> = records.par_iter().map(|r| scorer.vector(r)).collect();
    let groups: Vec<Vec<usize>> = blocks(records).into_values().filter(|g| g.len() > 1).collect();
    let mut pairs: Vec<DuplicatePair> = groups
        .par_iter()
        .flat_map_iter(|members| {
            let mut found = Vec::new();
            for (i, j) in block_pairs(members) {
                let s = vectors[i].cosine(&vectors[j]).unwrap_or(0.0);
                if let Some(tier) = classify_tier(s, bounds) {
                    let (a, b) = (&records[i].id, &records[j].id);
                    let (id_a, id_b) = if a < b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
                    found.push(DuplicatePair {
                        id_a,
                        id_b,
                        similarity: s,
                        tier,
                        decision: Decision::Pending,
                        decided_by: None,
                        decided_at: None,
                    });
                }
            }
            found
        })
        .collect();
    sort_pairs(&mut pairs);
    Ok(DedupResult { n_checks: records.len(), bounds: *bounds, pairs })
}

impl DedupResult {
    pub fn report(&self) -> DedupReport {
        dedup_report(self.n_checks, &self.pairs)
    }

    pub fn write_pairs_jsonl<W: Write>(&self, mut w: W) -> Result<(), DedupError> {
        for p in &self.pairs {
            serde_json::to_writer(&mut w, p)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}
