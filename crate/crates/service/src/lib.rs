//! Review service: duplicate adjudication, live what-if throttling numbers and
//! priority worklists over a fixed dataset, with every reviewer action kept in an
//! append-only log.

pub mod api;
pub mod dataset;
pub mod log;
pub mod service;
pub mod state;

use thiserror::Error;

pub use api::{router, serve, AppState};
pub use dataset::Dataset;
pub use log::{Action, DecisionLog, DecisionLogEntry};
pub use service::{ConfigPatch, Page, PairFilter, ReviewService, StateSummary, WhatIf, WhatIfQuery};
pub use state::{ReviewState, ServiceConfig, Verdict};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotLoaded(&'static str),
    #[error("invalid data: {0}")]
    BadData(String),
    #[error("decision log: {0}")]
    CorruptLog(String),
    #[error(transparent)]
    Corpus(#[from] checktrim_core::corpus::CorpusError),
    #[error(transparent)]
    Triage(#[from] checktrim_core::triage::TriageError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
