//! Check-record schema, ingestion, splitting and synthetic corpora.

mod io;
mod record;
mod split;
mod synth;

pub use io::{
    load_checks, load_events, load_jsonl, read_checks_csv, read_checks_jsonl, read_jsonl, save_jsonl, write_jsonl,
    Format, LoadedChecks, COLUMNS,
};
pub use record::{CheckRecord, LabelMode, SeverityEvent, Status};
pub use split::{split_train_test, DatasetSplit, Stratify};
pub use synth::{synthesize_corpus, synthesize_events, SynthConfig, SynthTruth, FOCUS_CUES, RISKY_VENDORS, RISK_CUES};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown column {column:?}")]
    UnknownColumn { line: usize, column: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { id: String, line: usize },
    #[error("line {line}: missing or empty id")]
    MissingId { line: usize },
    #[error("record {id:?} has no ioq_status label")]
    MissingLabel { id: String },
    #[error("need at least {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },
    #[error("no records with label {class}")]
    EmptyClass { class: Status },
    #[error("train fraction must be in (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}
