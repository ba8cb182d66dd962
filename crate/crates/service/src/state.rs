//! Review state rebuilt from the decision log.

use std::collections::{BTreeMap, BTreeSet};

use checktrim_core::corpus::LabelMode;
use checktrim_core::dedup::Decision;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::log::{Action, DecisionLogEntry};
use crate::ServiceError;

/// Thresholds reviewers can move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub severity_t: f64,
    pub pass_threshold: f64,
    pub label_mode: LabelMode,
}

impl ServiceConfig {
    pub fn validate(&self) -> Result<(), ServiceError> {
        for (name, v) in [("severity_t", self.severity_t), ("pass_threshold", self.pass_threshold)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ServiceError::BadRequest(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub decision: Decision,
    pub actor: String,
    pub at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewState {
    pub last_seq: u64,
    pub config: ServiceConfig,
    /// id_a to id_b to verdict, for decided pairs only.
    pub verdicts: BTreeMap<String, BTreeMap<String, Verdict>>,
    /// Checks taken out of the active set: id_b of every accepted pair.
    pub removed: BTreeSet<String>,
}

impl ReviewState {
    /// Before any logged action; pairs already decided in the input count as decided.
    pub fn initial(dataset: &Dataset) -> Self {
        let t = dataset.triage();
        let mut state = ReviewState {
            last_seq: 0,
            config: ServiceConfig { severity_t: t.severity_t, pass_threshold: t.pass_threshold, label_mode: t.label_mode },
            verdicts: BTreeMap::new(),
            removed: BTreeSet::new(),
        };
        for p in dataset.pairs().unwrap_or_default() {
            if p.decision != Decision::Pending {
                let v = Verdict {
                    decision: p.decision,
                    actor: p.decided_by.clone().unwrap_or_default(),
                    at: p.decided_at.clone().unwrap_or_default(),
                };
                state.record(&p.id_a, &p.id_b, v);
            }
        }
        state
    }

    pub fn verdict(&self, id_a: &str, id_b: &str) -> Option<&Verdict> {
        self.verdicts.get(id_a)?.get(id_b)
    }

    fn record(&mut self, id_a: &str, id_b: &str, v: Verdict) {
        if v.decision == Decision::Accepted {
            self.removed.insert(id_b.to_string());
        }
        self.verdicts.entry(id_a.to_string()).or_default().insert(id_b.to_string(), v);
    }

    pub fn count(&self, decision: Decision) -> usize {
        self.verdicts.values().flat_map(|m| m.values()).filter(|v| v.decision == decision).count()
    }

    /// Reject an entry that cannot follow the current state.
    pub fn check(&self, entry: &DecisionLogEntry, dataset: &Dataset) -> Result<(), ServiceError> {
        if entry.seq <= self.last_seq {
            return Err(ServiceError::CorruptLog(format!("sequence {} after {}", entry.seq, self.last_seq)));
        }
        match &entry.action {
            Action::AcceptPair { id_a, id_b } | Action::RejectPair { id_a, id_b } => {
                let pair = dataset.pair(id_a, id_b).ok_or_else(|| ServiceError::NotFound(format!("pair {id_a}/{id_b}")))?;
                if let Some(v) = self.verdict(&pair.id_a, &pair.id_b) {
                    return Err(ServiceError::Conflict(format!("pair {id_a}/{id_b} already {}", v.decision.as_str())));
                }
                Ok(())
            }
            Action::SetThreshold { .. } => self.with_thresholds(&entry.action).validate(),
        }
    }

    fn with_thresholds(&self, action: &Action) -> ServiceConfig {
        let mut c = self.config.clone();
        if let Action::SetThreshold { severity_t, pass_threshold, label_mode } = action {
            if let Some(t) = severity_t {
                c.severity_t = *t;
            }
            if let Some(p) = pass_threshold {
                c.pass_threshold = *p;
            }
            if let Some(m) = label_mode {
                c.label_mode = *m;
            }
        }
        c
    }

    pub fn apply(&mut self, entry: &DecisionLogEntry, dataset: &Dataset) -> Result<(), ServiceError> {
        self.check(entry, dataset)?;
        match &entry.action {
            Action::AcceptPair { id_a, id_b } | Action::RejectPair { id_a, id_b } => {
                let pair = dataset.pair(id_a, id_b).expect("checked above");
                let decision = if matches!(entry.action, Action::AcceptPair { .. }) { Decision::Accepted } else { Decision::Rejected };
                let v = Verdict { decision, actor: entry.actor.clone(), at: entry.timestamp.clone() };
                let (a, b) = (pair.id_a.clone(), pair.id_b.clone());
                self.record(&a, &b, v);
            }
            Action::SetThreshold { .. } => self.config = self.with_thresholds(&entry.action),
        }
        self.last_seq = entry.seq;
        Ok(())
    }

    pub fn replay<'a>(
        mut self,
        entries: impl IntoIterator<Item = &'a DecisionLogEntry>,
        dataset: &Dataset,
    ) -> Result<Self, ServiceError> {
        for e in entries {
            self.apply(e, dataset).map_err(|err| ServiceError::CorruptLog(format!("entry {}: {err}", e.seq)))?;
        }
        Ok(self)
    }
}
