use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Outcome of a single audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    pub fn is_pass(self) -> bool {
        self == Status::Pass
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pass" => Ok(Status::Pass),
            "fail" => Ok(Status::Fail),
            other => Err(format!("invalid status {other:?}, expected pass or fail")),
        }
    }
}

/// Which label a classifier learns to predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// Passes IOQ and VQ. A record without a VQ result is judged on IOQ alone.
    Throttled,
    /// IOQ status only.
    IoqOnly,
}

impl LabelMode {
    pub const ALL: [LabelMode; 2] = [LabelMode::Throttled, LabelMode::IoqOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            LabelMode::Throttled => "throttled",
            LabelMode::IoqOnly => "ioq_only",
        }
    }
}

impl fmt::Display for LabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "throttled" => Ok(LabelMode::Throttled),
            "ioq_only" | "ioq" => Ok(LabelMode::IoqOnly),
            other => Err(format!("unknown label mode {other:?}, expected throttled or ioq_only")),
        }
    }
}

/// One audit check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckRecord {
    pub id: String,
    #[serde(default)]
    pub asset_type: String,
    #[serde(default)]
    pub vendor: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<String>,
    #[serde(default)]
    pub checklist_text: String,
    #[serde(default)]
    pub focus_points: String,
    #[serde(default)]
    pub criticality: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity_group: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ioq_status: Option<Status>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vq_status: Option<Status>,
}

impl CheckRecord {
    /// A record with only the required fields set.
    pub fn new(id: impl Into<String>, checklist_text: impl Into<String>) -> Self {
        CheckRecord {
            id: id.into(),
            asset_type: String::new(),
            vendor: String::new(),
            site: None,
            checklist_text: checklist_text.into(),
            focus_points: String::new(),
            criticality: String::new(),
            severity_score: None,
            severity_group: None,
            ioq_status: None,
            vq_status: None,
        }
    }

    /// Training label under `mode`; `None` when the record carries no IOQ result.
    pub fn label(&self, mode: LabelMode) -> Option<Status> {
        let ioq = self.ioq_status?;
        match mode {
            LabelMode::IoqOnly => Some(ioq),
            LabelMode::Throttled => match (ioq, self.vq_status) {
                (Status::Pass, Some(Status::Fail)) => Some(Status::Fail),
                (ioq, _) => Some(ioq),
            },
        }
    }

    /// Text used for similarity and severity: checklist followed by focus points.
    pub fn combined_text(&self) -> String {
        if self.focus_points.trim().is_empty() {
            self.checklist_text.clone()
        } else {
            format!("{} {}", self.checklist_text, self.focus_points)
        }
    }
}

/// A recorded incident used for severity scoring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeverityEvent {
    pub id: String,
    pub description: String,
}
