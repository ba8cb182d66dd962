//! Immutable inputs the service reviews: check ids, candidate pairs and model scores.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use checktrim_core::corpus::{load_checks, load_jsonl, Format, LabelMode};
use checktrim_core::dedup::DuplicatePair;
use checktrim_core::triage::{PriorityBounds, ScoredCheck, TriageConfig};

use crate::ServiceError;

pub const CHECKS_FILE: &str = "checks.jsonl";
pub const PAIRS_FILE: &str = "pairs.jsonl";
pub const SCORES_FILE: &str = "scores.jsonl";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    check_ids: BTreeSet<String>,
    /// None when no dedup run has been loaded.
    pairs: Option<Vec<DuplicatePair>>,
    pair_index: HashMap<(String, String), usize>,
    scores: BTreeMap<LabelMode, Vec<ScoredCheck>>,
    triage: TriageConfig,
}

impl Dataset {
    /// Pairs are kept in descending similarity, then id_a, then id_b.
    pub fn new(
        check_ids: impl IntoIterator<Item = String>,
        pairs: Option<Vec<DuplicatePair>>,
        scores: Vec<ScoredCheck>,
        triage: TriageConfig,
    ) -> Result<Self, ServiceError> {
        triage.validate()?;
        let mut check_ids: BTreeSet<String> = check_ids.into_iter().collect();
        if check_ids.is_empty() {
            check_ids = scores.iter().map(|s| s.check_id.clone()).collect();
        }
        let known = |id: &str, what: &str| {
            if check_ids.contains(id) {
                Ok(())
            } else {
                Err(ServiceError::BadData(format!("{what} refers to unknown check {id:?}")))
            }
        };
        let pairs = match pairs {
            None => None,
            Some(mut ps) => {
                for p in ps.iter_mut() {
                    known(&p.id_a, "pair")?;
                    known(&p.id_b, "pair")?;
                    if p.id_a == p.id_b {
                        return Err(ServiceError::BadData(format!("pair of {:?} with itself", p.id_a)));
                    }
                    if p.id_a > p.id_b {
                        std::mem::swap(&mut p.id_a, &mut p.id_b);
                    }
                }
                ps.sort_by(|x, y| {
                    y.similarity.total_cmp(&x.similarity).then_with(|| x.id_a.cmp(&y.id_a)).then_with(|| x.id_b.cmp(&y.id_b))
                });
                Some(ps)
            }
        };
        let mut pair_index = HashMap::new();
        for (i, p) in pairs.iter().flatten().enumerate() {
            if pair_index.insert((p.id_a.clone(), p.id_b.clone()), i).is_some() {
                return Err(ServiceError::BadData(format!("pair {}/{} listed twice", p.id_a, p.id_b)));
            }
        }
        let mut by_mode: BTreeMap<LabelMode, Vec<ScoredCheck>> = BTreeMap::new();
        for s in scores {
            known(&s.check_id, "score")?;
            by_mode.entry(s.label_mode).or_default().push(s);
        }
        for (mode, set) in by_mode.iter_mut() {
            set.sort_by(|a, b| a.check_id.cmp(&b.check_id));
            if let Some(w) = set.windows(2).find(|w| w[0].check_id == w[1].check_id) {
                return Err(ServiceError::BadData(format!("check {:?} scored twice under {mode}", w[0].check_id)));
            }
            if set.len() != check_ids.len() {
                return Err(ServiceError::BadData(format!(
                    "{mode} scores cover {} of {} checks",
                    set.len(),
                    check_ids.len()
                )));
            }
        }
        Ok(Dataset { check_ids, pairs, pair_index, scores: by_mode, triage })
    }

    /// Read `checks.jsonl`, `pairs.jsonl`, `scores.jsonl` and `config.json`; every file is optional.
    pub fn load(dir: &Path) -> Result<Self, ServiceError> {
        let checks = dir.join(CHECKS_FILE);
        let ids: Vec<String> = if checks.exists() {
            load_checks(&checks, Format::Jsonl)?.records.into_iter().map(|r| r.id).collect()
        } else {
            Vec::new()
        };
        let pairs_path = dir.join(PAIRS_FILE);
        let pairs = if pairs_path.exists() { Some(load_jsonl(&pairs_path)?) } else { None };
        let scores_path = dir.join(SCORES_FILE);
        let scores = if scores_path.exists() { load_jsonl(&scores_path)? } else { Vec::new() };
        let config_path = dir.join(CONFIG_FILE);
        let triage = if config_path.exists() {
            serde_json::from_str(&std::fs::read_to_string(&config_path)?)?
        } else {
            TriageConfig::default()
        };
        Dataset::new(ids, pairs, scores, triage)
    }

    pub fn n_checks(&self) -> usize {
        self.check_ids.len()
    }

    pub fn check_ids(&self) -> &BTreeSet<String> {
        &self.check_ids
    }

    pub fn pairs(&self) -> Option<&[DuplicatePair]> {
        self.pairs.as_deref()
    }

    pub fn pair(&self, id_a: &str, id_b: &str) -> Option<&DuplicatePair> {
        let (a, b) = if id_a <= id_b { (id_a, id_b) } else { (id_b, id_a) };
        let i = *self.pair_index.get(&(a.to_string(), b.to_string()))?;
        self.pairs.as_ref().map(|ps| &ps[i])
    }

    pub fn scores(&self, mode: LabelMode) -> Option<&[ScoredCheck]> {
        self.scores.get(&mode).map(Vec::as_slice)
    }

    pub fn score_sets(&self) -> &BTreeMap<LabelMode, Vec<ScoredCheck>> {
        &self.scores
    }

    pub fn triage(&self) -> &TriageConfig {
        &self.triage
    }

    pub fn priority_bounds(&self) -> &PriorityBounds {
        &self.triage.priority
    }
}
