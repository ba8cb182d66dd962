//! Append-only JSONL log of reviewer actions.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use checktrim_core::corpus::LabelMode;
use serde::{Deserialize, Serialize};

use crate::ServiceError;

pub const LOG_FILE: &str = "decisions.log.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", content = "payload", rename_all = "snake_case")]
pub enum Action {
    AcceptPair { id_a: String, id_b: String },
    RejectPair { id_a: String, id_b: String },
    SetThreshold {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        severity_t: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pass_threshold: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label_mode: Option<LabelMode>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLogEntry {
    pub seq: u64,
    pub timestamp: String,
    pub actor: String,
    #[serde(flatten)]
    pub action: Action,
}

/// In-memory copy of the log, mirrored to a file when one is attached.
#[derive(Debug, Default)]
pub struct DecisionLog {
    path: Option<PathBuf>,
    file: Option<File>,
    entries: Vec<DecisionLogEntry>,
}

impl DecisionLog {
    pub fn in_memory() -> Self {
        DecisionLog::default()
    }

    /// Open or create the log at `path`, reading what is already there.
    pub fn open(path: &Path) -> Result<Self, ServiceError> {
        let entries = if path.exists() { read_entries(BufReader::new(File::open(path)?))? } else { Vec::new() };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(DecisionLog { path: Some(path.to_path_buf()), file: Some(file), entries })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn entries(&self) -> &[DecisionLogEntry] {
        &self.entries
    }

    pub fn last_seq(&self) -> u64 {
        self.entries.last().map_or(0, |e| e.seq)
    }

    /// Durably write one entry; on error nothing is recorded.
    pub fn append(&mut self, entry: DecisionLogEntry) -> Result<(), ServiceError> {
        if entry.seq <= self.last_seq() {
            return Err(ServiceError::CorruptLog(format!("sequence {} after {}", entry.seq, self.last_seq())));
        }
        if let Some(f) = self.file.as_mut() {
            let mut line = serde_json::to_vec(&entry)?;
            line.push(b'\n');
            f.write_all(&line)?;
            f.sync_data()?;
        }
        self.entries.push(entry);
        Ok(())
    }
}

pub fn read_entries<R: BufRead>(r: R) -> Result<Vec<DecisionLogEntry>, ServiceError> {
    let mut out: Vec<DecisionLogEntry> = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: DecisionLogEntry =
            serde_json::from_str(&line).map_err(|err| ServiceError::CorruptLog(format!("line {}: {err}", i + 1)))?;
        if out.last().is_some_and(|p| p.seq >= e.seq) {
            return Err(ServiceError::CorruptLog(format!("line {}: sequence {} is not increasing", i + 1, e.seq)));
        }
        out.push(e);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(seq: u64, action: Action) -> DecisionLogEntry {
        DecisionLogEntry { seq, timestamp: "2024-01-01T00:00:00Z".into(), actor: "ana".into(), action }
    }

    #[test]
    fn line_format() {
        let e = entry(1, Action::AcceptPair { id_a: "a".into(), id_b: "b".into() });
        assert_eq!(
            serde_json::to_string(&e).unwrap(),
            r#"{"seq":1,"timestamp":"2024-01-01T00:00:00Z","actor":"ana","action":"accept_pair","payload":{"id_a":"a","id_b":"b"}}"#
        );
        let t = entry(2, Action::SetThreshold { severity_t: Some(0.4), pass_threshold: None, label_mode: Some(LabelMode::IoqOnly) });
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.ends_with(r#""action":"set_threshold","payload":{"severity_t":0.4,"label_mode":"ioq_only"}}"#), "{s}");
        assert_eq!(serde_json::from_str::<DecisionLogEntry>(&s).unwrap(), t);
    }

    #[test]
    fn file_round_trip_and_ordering() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(LOG_FILE);
        let mut log = DecisionLog::open(&path).unwrap();
        log.append(entry(1, Action::RejectPair { id_a: "a".into(), id_b: "b".into() })).unwrap();
        log.append(entry(2, Action::AcceptPair { id_a: "c".into(), id_b: "d".into() })).unwrap();
        assert!(log.append(entry(2, Action::AcceptPair { id_a: "c".into(), id_b: "d".into() })).is_err());
        drop(log);
        let reopened = DecisionLog::open(&path).unwrap();
        assert_eq!(reopened.entries().len(), 2);
        assert_eq!(reopened.last_seq(), 2);

        let bad = "{\"seq\":2,\"timestamp\":\"t\",\"actor\":\"a\",\"action\":\"reject_pair\",\"payload\":{\"id_a\":\"a\",\"id_b\":\"b\"}}\n\
                   {\"seq\":1,\"timestamp\":\"t\",\"actor\":\"a\",\"action\":\"reject_pair\",\"payload\":{\"id_a\":\"a\",\"id_b\":\"b\"}}\n";
        assert!(matches!(read_entries(bad.as_bytes()), Err(ServiceError::CorruptLog(_))));
    }
}
