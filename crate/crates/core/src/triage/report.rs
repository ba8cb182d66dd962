use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Priority, Reason, TriageDecision};
use crate::dedup::DedupReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageSection {
    pub total: usize,
    pub by_reason: BTreeMap<Reason, usize>,
    pub priority: BTreeMap<Priority, usize>,
    pub gap_band: usize,
    pub throttled_pct: f64,
    pub duplicate_removed_pct: f64,
    /// Each check counts once, by the first action applied to it: dedup, then throttling.
    pub combined_reduction_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub triage: Option<TriageSection>,
    pub dedup: Option<DedupReport>,
}

fn pct(part: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * part as f64 / n as f64
    }
}

pub fn summary_report(decisions: &[TriageDecision], dedup: Option<&DedupReport>) -> SummaryReport {
    let triage = (!decisions.is_empty()).then(|| {
        let mut by_reason: BTreeMap<Reason, usize> = Reason::ALL.iter().map(|&r| (r, 0)).collect();
        let mut priority: BTreeMap<Priority, usize> = Priority::ALL.iter().map(|&p| (p, 0)).collect();
        let mut gap_band = 0;
        for d in decisions {
            *by_reason.get_mut(&d.reason).expect("all reasons present") += 1;
            *priority.get_mut(&d.priority).expect("all levels present") += 1;
            gap_band += usize::from(d.gap_band);
        }
        let n = decisions.len();
        let throttled = by_reason[&Reason::Throttled];
        let removed = by_reason[&Reason::ExcludedDuplicate];
        TriageSection {
            total: n,
            by_reason,
            priority,
            gap_band,
            throttled_pct: pct(throttled, n),
            duplicate_removed_pct: pct(removed, n),
            combined_reduction_pct: pct(throttled + removed, n),
        }
    });
    SummaryReport { triage, dedup: dedup.cloned() }
}

impl SummaryReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(t) = &self.triage {
            writeln!(out, "checks: {}", t.total).unwrap();
            for (r, n) in &t.by_reason {
                writeln!(out, "  {:<20} {:>8}  {:>6.2}%", r.as_str(), n, pct(*n, t.total)).unwrap();
            }
            writeln!(out, "priority:").unwrap();
            for (p, n) in &t.priority {
                writeln!(out, "  {:<20} {:>8}  {:>6.2}%", p.as_str(), n, pct(*n, t.total)).unwrap();
            }
            writeln!(out, "  {:<20} {:>8}", "gap band", t.gap_band).unwrap();
            writeln!(out, "throttled: {:.2}%", t.throttled_pct).unwrap();
            writeln!(out, "duplicates removed: {:.2}%", t.duplicate_removed_pct).unwrap();
            writeln!(out, "combined reduction: {:.2}%", t.combined_reduction_pct).unwrap();
        }
        if let Some(d) = &self.dedup {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&d.to_table());
        }
        out
    }
}
