//! Checklist-audit triage: near-duplicate detection, pass-probability
//! classifiers, severity gating and review prioritization.

pub mod classifiers;
pub mod corpus;
pub mod dedup;
pub mod metrics;
pub mod rng;
pub mod severity;
pub mod textprep;
pub mod triage;
pub mod vectors;
