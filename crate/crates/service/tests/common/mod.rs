#![allow(dead_code)]

use std::path::Path;

use checktrim_core::corpus::{save_jsonl, CheckRecord, LabelMode};
use checktrim_core::dedup::{Decision, DuplicatePair, Tier};
use checktrim_core::severity::SeverityScore;
use checktrim_core::triage::{ScoredCheck, TriageConfig};
use checktrim_service::Dataset;

pub const N: usize = 40;

pub fn ids() -> Vec<String> {
    (0..N).map(|i| format!("C-{i:03}")).collect()
}

/// Overlapping pairs so that chains and shared members are exercised.
pub fn pairs() -> Vec<DuplicatePair> {
    let ids = ids();
    let mut out = Vec::new();
    let mut links = Vec::new();
    for i in 0..N {
        if i % 2 == 0 && i + 1 < N {
            links.push((i, i + 1));
        }
        if i % 4 == 0 && i + 3 < N {
            links.push((i, i + 3));
            links.push((i + 1, i + 2));
        }
    }
    for (i, j) in links {
        let sim = 0.36 + ((i * 7 + j * 3) % 60) as f64 / 100.0;
        let tier = if sim >= 0.85 { Tier::Identical } else if sim >= 0.60 { Tier::High } else { Tier::Moderate };
        out.push(DuplicatePair {
            id_a: ids[i].clone(),
            id_b: ids[j].clone(),
            similarity: sim,
            tier,
            decision: Decision::Pending,
            decided_by: None,
            decided_at: None,
        });
    }
    out
}

pub fn scores() -> Vec<ScoredCheck> {
    let mut out = Vec::new();
    for mode in LabelMode::ALL {
        for (i, id) in ids().into_iter().enumerate() {
            let shift = if mode == LabelMode::IoqOnly { 0.05 } else { 0.0 };
            let p = ((i * 37 % N) as f64 / N as f64 + shift).min(1.0);
            let s = (i * 11 % N) as f64 / N as f64;
            out.push(ScoredCheck {
                check_id: id.clone(),
                label_mode: mode,
                p_pass: p,
                severity: SeverityScore { check_id: id, score: s, nearest_cluster: i % 3 },
            });
        }
    }
    out
}

pub fn dataset() -> Dataset {
    Dataset::new(ids(), Some(pairs()), scores(), TriageConfig::default()).unwrap()
}

pub fn write_dir(dir: &Path) {
    let checks: Vec<CheckRecord> = ids().into_iter().map(|id| CheckRecord::new(id, "inspect panel breaker")).collect();
    save_jsonl(&checks, &dir.join("checks.jsonl")).unwrap();
    save_jsonl(&pairs(), &dir.join("pairs.jsonl")).unwrap();
    save_jsonl(&scores(), &dir.join("scores.jsonl")).unwrap();
}

pub fn fixed_clock() -> String {
    "2024-05-01T10:00:00.000Z".to_string()
}
