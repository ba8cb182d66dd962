use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::record::{CheckRecord, SeverityEvent, Status};
use super::CorpusError;

/// Column names accepted in both JSONL keys and CSV headers.
pub const COLUMNS: [&str; 11] = [
    "id",
    "asset_type",
    "vendor",
    "site",
    "checklist_text",
    "focus_points",
    "criticality",
    "severity_score",
    "severity_group",
    "ioq_status",
    "vq_status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    /// Guess from the file extension; anything other than `.csv` is JSONL.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Jsonl,
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonl" | "json" => Ok(Format::Jsonl),
            other => Err(format!("unknown format {other:?}")),
        }
    }
}

/// Records that survived ingestion plus the number of rows dropped for missing checklist text.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedChecks {
    pub records: Vec<CheckRecord>,
    pub dropped: usize,
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io { path: path.display().to_string(), source }
}

pub fn load_checks(path: &Path, format: Format) -> Result<LoadedChecks, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    match format {
        Format::Jsonl => read_checks_jsonl(BufReader::new(file)),
        Format::Csv => read_checks_csv(file),
    }
}

pub fn read_checks_jsonl<R: BufRead>(reader: R) -> Result<LoadedChecks, CorpusError> {
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Parse { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line)
            .map_err(|e| CorpusError::Parse { line: line_no, message: e.to_string() })?;
        let Value::Object(map) = value else {
            return Err(CorpusError::Parse { line: line_no, message: "expected a JSON object".into() });
        };
        if let Some(key) = map.keys().find(|k| !COLUMNS.contains(&k.as_str())) {
            return Err(CorpusError::UnknownColumn { line: line_no, column: key.clone() });
        }
        rows.push((line_no, json_row(map, line_no)?));
    }
    finish(rows)
}

fn json_row(mut map: Map<String, Value>, line: usize) -> Result<CheckRecord, CorpusError> {
    // A null or empty checklist is a missing value, handled by the drop rule.
    if matches!(map.get("checklist_text"), Some(Value::Null)) {
        map.remove("checklist_text");
    }
    for key in ["site", "severity_group", "severity_score", "ioq_status", "vq_status"] {
        if matches!(map.get(key), Some(Value::String(s)) if s.trim().is_empty()) {
            map.remove(key);
        }
    }
    for key in ["asset_type", "vendor", "focus_points", "criticality"] {
        if matches!(map.get(key), Some(Value::Null)) {
            map.remove(key);
        }
    }
    if !map.contains_key("id") {
        return Err(CorpusError::MissingId { line });
    }
    serde_json::from_value(Value::Object(map))
        .map_err(|e| CorpusError::Parse { line, message: e.to_string() })
}

pub fn read_checks_csv<R: std::io::Read>(reader: R) -> Result<LoadedChecks, CorpusError> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| CorpusError::Parse { line: 1, message: e.to_string() })?
        .clone();
    let mut positions: Vec<usize> = Vec::with_capacity(headers.len());
    for name in headers.iter() {
        let name = name.trim();
        match COLUMNS.iter().position(|c| *c == name) {
            Some(p) => positions.push(p),
            None => return Err(CorpusError::UnknownColumn { line: 1, column: name.to_string() }),
        }
    }
    if !positions.contains(&0) {
        return Err(CorpusError::MissingId { line: 1 });
    }

    let mut rows = Vec::new();
    for (idx, row) in csv.records().enumerate() {
        let line = idx + 2;
        let row = row.map_err(|e| CorpusError::Parse { line, message: e.to_string() })?;
        let mut fields: [Option<String>; 11] = Default::default();
        for (value, &col) in row.iter().zip(&positions) {
            let v = value.trim();
            if !v.is_empty() {
                fields[col] = Some(v.to_string());
            }
        }
        rows.push((line, csv_row(fields, line)?));
    }
    finish(rows)
}

fn csv_row(fields: [Option<String>; 11], line: usize) -> Result<CheckRecord, CorpusError> {
    let [id, asset_type, vendor, site, checklist_text, focus_points, criticality, severity_score, severity_group, ioq, vq] =
        fields;
    let parse_status = |raw: Option<String>| -> Result<Option<Status>, CorpusError> {
        raw.map(|s| s.parse::<Status>().map_err(|message| CorpusError::Parse { line, message }))
            .transpose()
    };
    let severity_score = severity_score
        .map(|s| {
            s.parse::<f64>()
                .map_err(|e| CorpusError::Parse { line, message: format!("severity_score: {e}") })
        })
        .transpose()?;
    Ok(CheckRecord {
        id: id.unwrap_or_default(),
        asset_type: asset_type.unwrap_or_default(),
        vendor: vendor.unwrap_or_default(),
        site,
        checklist_text: checklist_text.unwrap_or_default(),
        focus_points: focus_points.unwrap_or_default(),
        criticality: criticality.unwrap_or_default(),
        severity_score,
        severity_group,
        ioq_status: parse_status(ioq)?,
        vq_status: parse_status(vq)?,
    })
}

/// Apply the record invariants in file order: ids nonempty and unique, blank checklists dropped.
fn finish(rows: Vec<(usize, CheckRecord)>) -> Result<LoadedChecks, CorpusError> {
    let mut seen = HashSet::new();
    let mut records = Vec::with_capacity(rows.len());
    let mut dropped = 0;
    for (line, record) in rows {
        if record.id.trim().is_empty() {
            return Err(CorpusError::MissingId { line });
        }
        if let Some(score) = record.severity_score {
            if !(0.0..=1.0).contains(&score) {
                return Err(CorpusError::Parse {
                    line,
                    message: format!("severity_score {score} outside [0, 1]"),
                });
            }
        }
        if !seen.insert(record.id.clone()) {
            return Err(CorpusError::DuplicateId { id: record.id, line });
        }
        if record.checklist_text.trim().is_empty() {
            dropped += 1;
            continue;
        }
        records.push(record);
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} rows with empty checklist_text");
    }
    Ok(LoadedChecks { records, dropped })
}

pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], writer: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn save_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    write_jsonl(items, file).map_err(|e| io_err(path, e))
}

/// Read any JSONL file of `T`, one object per nonblank line.
pub fn read_jsonl<T: for<'de> Deserialize<'de>, R: BufRead>(reader: R) -> Result<Vec<T>, CorpusError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Parse { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| CorpusError::Parse { line: line_no, message: e.to_string() })?,
        );
    }
    Ok(out)
}

pub fn load_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    read_jsonl(BufReader::new(file))
}

pub fn load_events(path: &Path) -> Result<Vec<SeverityEvent>, CorpusError> {
    let events: Vec<SeverityEvent> = load_jsonl(path)?;
    let mut seen = HashSet::new();
    for (idx, e) in events.iter().enumerate() {
        if e.description.trim().is_empty() {
            return Err(CorpusError::Parse { line: idx + 1, message: format!("event {} has empty description", e.id) });
        }
        if !seen.insert(e.id.as_str()) {
            return Err(CorpusError::DuplicateId { id: e.id.clone(), line: idx + 1 });
        }
    }
    Ok(events)
}
