//! Review operations shared by the HTTP layer and tests.

use std::path::{Path, PathBuf};

use checktrim_core::corpus::LabelMode;
use checktrim_core::dedup::{Decision, DuplicatePair, Tier};
use checktrim_core::triage::{triage_scored, whatif_cell, Priority, Reason, SweepCell, TriageConfig, TriageDecision};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::log::{Action, DecisionLog, DecisionLogEntry, LOG_FILE};
use crate::state::{ReviewState, ServiceConfig};
use crate::ServiceError;

pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const MAX_PAGE_SIZE: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    pub total: usize,
    /// 1-based.
    pub page: usize,
    pub page_size: usize,
    pub next_page: Option<usize>,
    pub prev_page: Option<usize>,
}

impl<T: Clone> Page<T> {
    fn of(all: &[T], page: usize, page_size: usize) -> Result<Self, ServiceError> {
        if page == 0 {
            return Err(ServiceError::BadRequest("page numbers start at 1".into()));
        }
        if page_size == 0 || page_size > MAX_PAGE_SIZE {
            return Err(ServiceError::BadRequest(format!("page_size must be in 1..={MAX_PAGE_SIZE}")));
        }
        let start = (page - 1).saturating_mul(page_size);
        let items: Vec<T> = all.iter().skip(start).take(page_size).cloned().collect();
        let end = start.saturating_add(page_size);
        Ok(Page {
            items,
            total: all.len(),
            page,
            page_size,
            next_page: (end < all.len()).then_some(page + 1),
            prev_page: (page > 1).then_some(page - 1),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairFilter {
    pub tier: Option<Tier>,
    pub decision: Option<Decision>,
    pub page: Option<usize>,
    pub page_size: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WhatIfQuery {
    pub t: Option<f64>,
    pub label_mode: Option<LabelMode>,
    pub pass_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIf {
    #[serde(flatten)]
    pub cell: SweepCell,
    pub active: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub n_checks: usize,
    pub active: usize,
    pub removed: usize,
    pub pairs: Option<usize>,
    pub accepted: usize,
    pub rejected: usize,
    pub pending: Option<usize>,
    pub last_seq: u64,
    pub config: ServiceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigPatch {
    pub severity_t: Option<f64>,
    pub pass_threshold: Option<f64>,
    pub label_mode: Option<LabelMode>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub struct ReviewService {
    dataset: Dataset,
    state: ReviewState,
    log: DecisionLog,
    dir: Option<PathBuf>,
    snapshot_every: u64,
    clock: fn() -> String,
}

impl ReviewService {
    pub fn in_memory(dataset: Dataset) -> Self {
        ReviewService {
            state: ReviewState::initial(&dataset),
            dataset,
            log: DecisionLog::in_memory(),
            dir: None,
            snapshot_every: 100,
            clock: now,
        }
    }

    /// Load the dataset in `dir` and rebuild state from the snapshot and the log tail.
    pub fn open(dir: &Path) -> Result<Self, ServiceError> {
        let dataset = Dataset::load(dir)?;
        let log = DecisionLog::open(&dir.join(LOG_FILE))?;
        let snapshot_path = dir.join(SNAPSHOT_FILE);
        let mut base = ReviewState::initial(&dataset);
        if snapshot_path.exists() {
            let snap: ReviewState = serde_json::from_str(&std::fs::read_to_string(&snapshot_path)?)?;
            let anchored = snap.last_seq == 0 || log.entries().iter().any(|e| e.seq == snap.last_seq);
            if anchored && snap.last_seq <= log.last_seq() {
                base = snap;
            } else {
                log::warn!("ignoring snapshot at sequence {} that the log does not reach", snap.last_seq);
            }
        }
        let from = base.last_seq;
        let state = base.replay(log.entries().iter().filter(|e| e.seq > from), &dataset)?;
        Ok(ReviewService { dataset, state, log, dir: Some(dir.to_path_buf()), snapshot_every: 100, clock: now })
    }

    pub fn with_clock(mut self, clock: fn() -> String) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_snapshot_every(mut self, n: u64) -> Self {
        self.snapshot_every = n.max(1);
        self
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn state(&self) -> &ReviewState {
        &self.state
    }

    pub fn log_entries(&self) -> &[DecisionLogEntry] {
        self.log.entries()
    }

    /// State rebuilt from scratch out of the log alone.
    pub fn replayed(&self) -> Result<ReviewState, ServiceError> {
        ReviewState::initial(&self.dataset).replay(self.log.entries(), &self.dataset)
    }

    pub fn active_count(&self) -> usize {
        self.dataset.n_checks() - self.state.removed.len()
    }

    fn commit(&mut self, actor: &str, action: Action) -> Result<(), ServiceError> {
        let entry = DecisionLogEntry { seq: self.state.last_seq + 1, timestamp: (self.clock)(), actor: actor.to_string(), action };
        self.state.check(&entry, &self.dataset)?;
        self.log.append(entry.clone())?;
        self.state.apply(&entry, &self.dataset)?;
        if entry.seq.is_multiple_of(self.snapshot_every) {
            self.write_snapshot()?;
        }
        Ok(())
    }

    fn write_snapshot(&self) -> Result<(), ServiceError> {
        if let Some(dir) = &self.dir {
            let tmp = dir.join(format!("{SNAPSHOT_FILE}.tmp"));
            std::fs::write(&tmp, serde_json::to_vec(&self.state)?)?;
            std::fs::rename(&tmp, dir.join(SNAPSHOT_FILE))?;
        }
        Ok(())
    }

    fn view(&self, p: &DuplicatePair) -> DuplicatePair {
        let mut out = p.clone();
        match self.state.verdict(&p.id_a, &p.id_b) {
            Some(v) => {
                out.decision = v.decision;
                out.decided_by = Some(v.actor.clone()).filter(|s| !s.is_empty());
                out.decided_at = Some(v.at.clone()).filter(|s| !s.is_empty());
            }
            None => {
                out.decision = Decision::Pending;
                out.decided_by = None;
                out.decided_at = None;
            }
        }
        out
    }

    fn loaded_pairs(&self) -> Result<&[DuplicatePair], ServiceError> {
        self.dataset.pairs().ok_or(ServiceError::NotLoaded("no dedup results loaded"))
    }

    pub fn pairs(&self, filter: &PairFilter) -> Result<Page<DuplicatePair>, ServiceError> {
        let all: Vec<DuplicatePair> = self
            .loaded_pairs()?
            .iter()
            .filter(|p| filter.tier.is_none_or(|t| p.tier == t))
            .map(|p| self.view(p))
            .filter(|p| filter.decision.is_none_or(|d| p.decision == d))
            .collect();
        Page::of(&all, filter.page.unwrap_or(1), filter.page_size.unwrap_or(DEFAULT_PAGE_SIZE))
    }

    /// Record a decision. Re-posting the decision a pair already has changes nothing and returns `false`.
    pub fn decide(&mut self, id_a: &str, id_b: &str, decision: Decision, actor: &str) -> Result<(DuplicatePair, bool), ServiceError> {
        self.loaded_pairs()?;
        let pair = self.dataset.pair(id_a, id_b).ok_or_else(|| ServiceError::NotFound(format!("pair {id_a}/{id_b}")))?.clone();
        let action = match decision {
            Decision::Accepted => Action::AcceptPair { id_a: pair.id_a.clone(), id_b: pair.id_b.clone() },
            Decision::Rejected => Action::RejectPair { id_a: pair.id_a.clone(), id_b: pair.id_b.clone() },
            Decision::Pending => return Err(ServiceError::BadRequest("decision must be accept or reject".into())),
        };
        if let Some(v) = self.state.verdict(&pair.id_a, &pair.id_b) {
            return if v.decision == decision {
                Ok((self.view(&pair), false))
            } else {
                Err(ServiceError::Conflict(format!("pair {}/{} already {}", pair.id_a, pair.id_b, v.decision.as_str())))
            };
        }
        self.commit(actor, action)?;
        Ok((self.view(&pair), true))
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.state.config
    }

    pub fn set_config(&mut self, patch: &ConfigPatch, actor: &str) -> Result<ServiceConfig, ServiceError> {
        if patch.severity_t.is_none() && patch.pass_threshold.is_none() && patch.label_mode.is_none() {
            return Err(ServiceError::BadRequest("nothing to change".into()));
        }
        if let Some(m) = patch.label_mode {
            if self.dataset.scores(m).is_none() {
                return Err(ServiceError::BadRequest(format!("no scores loaded for label mode {m}")));
            }
        }
        let action = Action::SetThreshold {
            severity_t: patch.severity_t,
            pass_threshold: patch.pass_threshold,
            label_mode: patch.label_mode,
        };
        self.commit(actor, action)?;
        Ok(self.state.config.clone())
    }

    pub fn whatif(&self, q: &WhatIfQuery) -> Result<WhatIf, ServiceError> {
        let c = &self.state.config;
        let t = q.t.unwrap_or(c.severity_t);
        let pt = q.pass_threshold.unwrap_or(c.pass_threshold);
        ServiceConfig { severity_t: t, pass_threshold: pt, label_mode: c.label_mode }.validate()?;
        let mode = q.label_mode.unwrap_or(c.label_mode);
        let scores = self.dataset.scores(mode).ok_or(ServiceError::NotLoaded("no scores loaded for this label mode"))?;
        Ok(WhatIf { cell: whatif_cell(scores, &self.state.removed, mode, t, pt), active: self.active_count() })
    }

    fn triage_config(&self) -> TriageConfig {
        let c = &self.state.config;
        TriageConfig {
            pass_threshold: c.pass_threshold,
            severity_t: c.severity_t,
            label_mode: c.label_mode,
            ..self.dataset.triage().clone()
        }
    }

    /// Active checks at the current thresholds, ascending p_pass, then check id.
    pub fn priorities(&self, level: Option<Priority>, page: Option<usize>, page_size: Option<usize>) -> Result<Page<TriageDecision>, ServiceError> {
        let config = self.triage_config();
        let mut decisions: Vec<TriageDecision> = match self.dataset.scores(config.label_mode) {
            Some(scores) => triage_scored(scores, &self.state.removed, &config)
                .into_iter()
                .filter(|d| d.reason != Reason::ExcludedDuplicate && level.is_none_or(|l| d.priority == l))
                .collect(),
            None if self.dataset.n_checks() == 0 => Vec::new(),
            None => return Err(ServiceError::NotLoaded("no triage scores loaded")),
        };
        decisions.sort_by(|a, b| a.p_pass.total_cmp(&b.p_pass).then_with(|| a.check_id.cmp(&b.check_id)));
        Page::of(&decisions, page.unwrap_or(1), page_size.unwrap_or(DEFAULT_PAGE_SIZE))
    }

    pub fn summary(&self) -> StateSummary {
        let pairs = self.dataset.pairs().map(<[_]>::len);
        let accepted = self.state.count(Decision::Accepted);
        let rejected = self.state.count(Decision::Rejected);
        StateSummary {
            n_checks: self.dataset.n_checks(),
            active: self.active_count(),
            removed: self.state.removed.len(),
            pairs,
            accepted,
            rejected,
            pending: pairs.map(|n| n - accepted - rejected),
            last_seq: self.state.last_seq,
            config: self.state.config.clone(),
        }
    }

    pub fn log_page(&self, after: u64, limit: usize) -> Vec<DecisionLogEntry> {
        self.log.entries().iter().filter(|e| e.seq > after).take(limit).cloned().collect()
    }
}
