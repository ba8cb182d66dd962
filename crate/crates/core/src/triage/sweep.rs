use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Reason, ScoredCheck, TriageError};
use crate::corpus::LabelMode;
use crate::severity::severity_gate;

/// Outcome shares for one (label mode, t) setting; the four percentages sum to 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub label_mode: LabelMode,
    pub t: f64,
    pub pass_threshold: f64,
    pub n: usize,
    pub trimmed: usize,
    pub blocked: usize,
    pub fail: usize,
    pub duplicate_removed: usize,
    pub trimmed_pct: f64,
    pub blocked_pct: f64,
    pub fail_pct: f64,
    pub duplicate_removed_pct: f64,
}

impl SweepCell {
    pub fn count(&self, reason: Reason) -> usize {
        match reason {
            Reason::Throttled => self.trimmed,
            Reason::BlockedBySeverity => self.blocked,
            Reason::PredictedFail => self.fail,
            Reason::ExcludedDuplicate => self.duplicate_removed,
        }
    }
}

fn pct(part: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * part as f64 / n as f64
    }
}

pub fn whatif_cell(
    scored: &[ScoredCheck],
    excluded: &BTreeSet<String>,
    label_mode: LabelMode,
    t: f64,
    pass_threshold: f64,
) -> SweepCell {
    let (mut trimmed, mut blocked, mut fail, mut dup) = (0, 0, 0, 0);
    for s in scored {
        if excluded.contains(&s.check_id) {
            dup += 1;
        } else if s.p_pass < pass_threshold {
            fail += 1;
        } else if !severity_gate(s.severity.score, t) {
            blocked += 1;
        } else {
            trimmed += 1;
        }
    }
    let n = scored.len();
    SweepCell {
        label_mode,
        t,
        pass_threshold,
        n,
        trimmed,
        blocked,
        fail,
        duplicate_removed: dup,
        trimmed_pct: pct(trimmed, n),
        blocked_pct: pct(blocked, n),
        fail_pct: pct(fail, n),
        duplicate_removed_pct: pct(dup, n),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Mode-major, then t in the order given.
    pub cells: Vec<SweepCell>,
}

/// One cell per (label mode, t), in parallel.
pub fn whatif_sweep(
    scores: &BTreeMap<LabelMode, Vec<ScoredCheck>>,
    excluded: &BTreeSet<String>,
    pass_threshold: f64,
    t_values: &[f64],
    label_modes: &[LabelMode],
) -> Result<SweepResult, TriageError> {
    if t_values.is_empty() {
        return Err(TriageError::EmptyThresholds);
    }
    if let Some(t) = t_values.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(TriageError::InvalidConfig(format!("t = {t} is outside [0, 1]")));
    }
    let mut jobs = Vec::new();
    for &mode in label_modes {
        let set = scores.get(&mode).ok_or(TriageError::MissingScores(mode))?;
        jobs.extend(t_values.iter().map(|&t| (mode, set, t)));
    }
    let cells = jobs.into_par_iter().map(|(mode, set, t)| whatif_cell(set, excluded, mode, t, pass_threshold)).collect();
    Ok(SweepResult { cells })
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label_mode,t,pass_threshold,n,trimmed_pct,blocked_pct,fail_pct,duplicate_removed_pct\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{:.4},{:.4},{:.4},{:.4}\n",
                c.label_mode, c.t, c.pass_threshold, c.n, c.trimmed_pct, c.blocked_pct, c.fail_pct, c.duplicate_removed_pct
            ));
        }
        out
    }

    /// Trimmed percentage with one row per t and one column per label mode.
    pub fn to_matrix_csv(&self) -> String {
        let mut modes: Vec<LabelMode> = Vec::new();
        let mut ts: Vec<f64> = Vec::new();
        for c in &self.cells {
            if !modes.contains(&c.label_mode) {
                modes.push(c.label_mode);
            }
            if !ts.iter().any(|t| t.to_bits() == c.t.to_bits()) {
                ts.push(c.t);
            }
        }
        let mut out = String::from("t");
        for m in &modes {
            out.push(',');
            out.push_str(m.as_str());
        }
        out.push('\n');
        for t in ts {
            out.push_str(&t.to_string());
            for m in &modes {
                let cell = self.cells.iter().find(|c| c.label_mode == *m && c.t.to_bits() == t.to_bits());
                out.push(',');
                if let Some(c) = cell {
                    out.push_str(&format!("{:.4}", c.trimmed_pct));
                }
            }
            out.push('\n');
        }
        out
    }
}
