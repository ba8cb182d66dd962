//! Throttle verdicts and review priorities from pass probability, severity
//! similarity and duplicate decisions.

mod report;
mod sweep;

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{ModelKind, PassProbability};
use crate::corpus::{CheckRecord, LabelMode, Status};
use crate::dedup::{Decision, DuplicatePair, TierBounds};
use crate::metrics::{confusion, MetricError};
use crate::severity::{severity_gate, severity_score, SeverityModel, SeverityScore};

pub use report::{summary_report, SummaryReport, TriageSection};
pub use sweep::{whatif_cell, whatif_sweep, SweepCell, SweepResult};

#[derive(Debug, Error)]
pub enum TriageError {
    #[error("invalid triage config: {0}")]
    InvalidConfig(String),
    #[error("duplicate decision refers to unknown check {0:?}")]
    UnknownCheck(String),
    #[error("no scores for label mode {0}")]
    MissingScores(LabelMode),
    #[error("no threshold values given")]
    EmptyThresholds,
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Priority {
    /// Low review priority: very likely to pass.
    Level1,
    Level2,
    /// High review priority.
    Level3,
}

impl Priority {
    pub const ALL: [Priority; 3] = [Priority::Level1, Priority::Level2, Priority::Level3];

    pub fn as_str(self) -> &'static str {
        match self {
            Priority::Level1 => "Level1",
            Priority::Level2 => "Level2",
            Priority::Level3 => "Level3",
        }
    }
}

impl fmt::Display for Priority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Priority {
    type Err = TriageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "level1" | "1" => Ok(Priority::Level1),
            "level2" | "2" => Ok(Priority::Level2),
            "level3" | "3" => Ok(Priority::Level3),
            other => Err(TriageError::InvalidConfig(format!("unknown priority level {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorityBounds {
    /// Level1 strictly above this.
    pub level1_min: f64,
    /// Level2 strictly above this, up to `level1_min`.
    pub level2_min: f64,
    /// Probabilities from here up to `level2_min` fall in the gap band, reported as Level3.
    pub level3_max: f64,
}

impl Default for PriorityBounds {
    fn default() -> Self {
        PriorityBounds { level1_min: 0.90, level2_min: 0.79, level3_max: 0.72 }
    }
}

impl PriorityBounds {
    pub fn validate(&self) -> Result<(), TriageError> {
        let PriorityBounds { level1_min: l1, level2_min: l2, level3_max: l3 } = *self;
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if unit(l1) && unit(l2) && unit(l3) && l1 > l2 && l3 <= l2 {
            Ok(())
        } else {
            Err(TriageError::InvalidConfig(format!("priority bounds {l1}/{l2}/{l3} out of order or outside [0, 1]")))
        }
    }

    pub fn in_gap_band(&self, p_pass: f64) -> bool {
        p_pass >= self.level3_max && p_pass <= self.level2_min
    }
}

pub fn assign_priority(p_pass: f64, bounds: &PriorityBounds) -> Priority {
    if p_pass > bounds.level1_min {
        Priority::Level1
    } else if p_pass > bounds.level2_min {
        Priority::Level2
    } else {
        Priority::Level3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    Throttled,
    BlockedBySeverity,
    PredictedFail,
    ExcludedDuplicate,
}

impl Reason {
    pub const ALL: [Reason; 4] = [Reason::Throttled, Reason::BlockedBySeverity, Reason::PredictedFail, Reason::ExcludedDuplicate];

    pub fn as_str(self) -> &'static str {
        match self {
            Reason::Throttled => "throttled",
            Reason::BlockedBySeverity => "blocked_by_severity",
            Reason::PredictedFail => "predicted_fail",
            Reason::ExcludedDuplicate => "excluded_duplicate",
        }
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TriageConfig {
    pub classifier: ModelKind,
    /// Trained model file, used by the command line.
    pub model_path: Option<String>,
    pub severity_model_path: Option<String>,
    pub pass_threshold: f64,
    pub severity_t: f64,
    pub tier_bounds: TierBounds,
    pub priority: PriorityBounds,
    pub label_mode: LabelMode,
}

impl Default for TriageConfig {
    fn default() -> Self {
        TriageConfig {
            classifier: ModelKind::Blazing,
            model_path: None,
            severity_model_path: None,
            pass_threshold: 0.5,
            severity_t: 0.5,
            tier_bounds: TierBounds::default(),
            priority: PriorityBounds::default(),
            label_mode: LabelMode::Throttled,
        }
    }
}

impl TriageConfig {
    pub fn validate(&self) -> Result<(), TriageError> {
        for (name, v) in [("pass_threshold", self.pass_threshold), ("severity_t", self.severity_t)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(TriageError::InvalidConfig(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        self.tier_bounds.validate().map_err(|e| TriageError::InvalidConfig(e.to_string()))?;
        self.priority.validate()
    }
}

/// Model outputs for one check; verdicts are derived from these without rerunning models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCheck {
    pub check_id: String,
    pub label_mode: LabelMode,
    pub p_pass: f64,
    pub severity: SeverityScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageDecision {
    pub check_id: String,
    pub p_pass: f64,
    pub severity: SeverityScore,
    pub priority: Priority,
    pub gap_band: bool,
    pub throttled: bool,
    pub reason: Reason,
}

impl TriageDecision {
    /// Throttled exactly when the reason says so, and then both gates passed.
    pub fn is_sound(&self, config: &TriageConfig) -> bool {
        let gates = self.p_pass >= config.pass_threshold && self.severity.score < config.severity_t;
        self.throttled == (self.reason == Reason::Throttled) && (!self.throttled || gates)
    }
}

pub fn score_check(
    record: &CheckRecord,
    label_mode: LabelMode,
    model: &(impl PassProbability + ?Sized),
    severity: &SeverityModel,
) -> ScoredCheck {
    ScoredCheck {
        check_id: record.id.clone(),
        label_mode,
        p_pass: model.predict_proba(record),
        severity: severity_score(record, severity),
    }
}

pub fn score_checks<M: PassProbability + Sync + ?Sized>(
    records: &[CheckRecord],
    label_mode: LabelMode,
    model: &M,
    severity: &SeverityModel,
) -> Vec<ScoredCheck> {
    records.par_iter().map(|r| score_check(r, label_mode, model, severity)).collect()
}

/// Verdict precedence: removed duplicate, then predicted fail, then severity block.
pub fn decide(
    scored: &ScoredCheck,
    excluded: bool,
    pass_threshold: f64,
    severity_t: f64,
    bounds: &PriorityBounds,
) -> TriageDecision {
    let reason = if excluded {
        Reason::ExcludedDuplicate
    } else if scored.p_pass < pass_threshold {
        Reason::PredictedFail
    } else if !severity_gate(scored.severity.score, severity_t) {
        Reason::BlockedBySeverity
    } else {
        Reason::Throttled
    };
    TriageDecision {
        check_id: scored.check_id.clone(),
        p_pass: scored.p_pass,
        severity: scored.severity.clone(),
        priority: assign_priority(scored.p_pass, bounds),
        gap_band: bounds.in_gap_band(scored.p_pass),
        throttled: reason == Reason::Throttled,
        reason,
    }
}

pub fn triage_check(
    record: &CheckRecord,
    config: &TriageConfig,
    model: &(impl PassProbability + ?Sized),
    severity: &SeverityModel,
    excluded: &BTreeSet<String>,
) -> TriageDecision {
    let scored = score_check(record, config.label_mode, model, severity);
    decide(&scored, excluded.contains(&record.id), config.pass_threshold, config.severity_t, &config.priority)
}

pub fn triage_scored(scored: &[ScoredCheck], excluded: &BTreeSet<String>, config: &TriageConfig) -> Vec<TriageDecision> {
    scored
        .iter()
        .map(|s| decide(s, excluded.contains(&s.check_id), config.pass_threshold, config.severity_t, &config.priority))
        .collect()
}

/// Checks removed by accepted duplicate pairs: the larger id of each pair.
pub fn excluded_duplicates<'a>(
    pairs: impl IntoIterator<Item = &'a DuplicatePair>,
    known_ids: &HashSet<&str>,
) -> Result<BTreeSet<String>, TriageError> {
    let mut out = BTreeSet::new();
    for p in pairs {
        for id in [&p.id_a, &p.id_b] {
            if !known_ids.contains(id.as_str()) {
                return Err(TriageError::UnknownCheck(id.clone()));
            }
        }
        if p.decision == Decision::Accepted {
            out.insert(p.id_a.clone().max(p.id_b.clone()));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMetrics {
    pub level: Priority,
    pub threshold: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

/// Sensitivity and specificity of "predicted pass" at each level boundary, on held-out labels.
pub fn level_evaluation(scores: &[f64], labels: &[Status], bounds: &PriorityBounds) -> Result<Vec<LevelMetrics>, TriageError> {
    let rows = [(Priority::Level1, bounds.level1_min), (Priority::Level2, bounds.level2_min), (Priority::Level3, bounds.level3_max)];
    rows.iter()
        .map(|&(level, threshold)| {
            let cm = confusion(scores, labels, threshold)?;
            Ok(LevelMetrics { level, threshold, sensitivity: cm.sensitivity().ok(), specificity: cm.specificity().ok() })
        })
        .collect()
}
