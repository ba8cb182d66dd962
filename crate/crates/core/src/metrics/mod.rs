//! Confusion-matrix metrics and rank-based ROC AUC.
//!
//! "pass" is the positive class everywhere: a record is predicted pass when
//! its pass probability is at least the threshold.

mod ablation;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Status;

pub use ablation::{feature_ablation, format_ablation, AblationConfig, AblationError, AblationRow};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("no scores to evaluate")]
    Empty,
    #[error("score {0} is not finite")]
    NonFiniteScore(f64),
    #[error("AUC needs both classes; only {0} present")]
    SingleClass(Status),
    #[error("{0} is undefined: zero denominator")]
    Undefined(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio(num: u64, den: u64, name: &'static str) -> Result<f64, MetricError> {
    if den == 0 {
        Err(MetricError::Undefined(name))
    } else {
        Ok(num as f64 / den as f64)
    }
}

/// `hits / (hits + misses / 2)`, evaluated as `2 hits / (2 hits + misses)` so the counts stay integral.
fn f1(hits: u64, misses: u64, name: &'static str) -> Result<f64, MetricError> {
    ratio(2 * hits, 2 * hits + misses, name)
}

impl ConfusionMatrix {
    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }

    pub fn total(&self) -> u64 {
        self.positives() + self.negatives()
    }

    pub fn accuracy(&self) -> Result<f64, MetricError> {
        ratio(self.tp + self.tn, self.total(), "accuracy")
    }

    /// True pass rate.
    pub fn sensitivity(&self) -> Result<f64, MetricError> {
        ratio(self.tp, self.positives(), "sensitivity")
    }

    /// True fail rate.
    pub fn specificity(&self) -> Result<f64, MetricError> {
        ratio(self.tn, self.negatives(), "specificity")
    }

    pub fn precision(&self) -> Result<f64, MetricError> {
        ratio(self.tp, self.tp + self.fp, "precision")
    }

    /// `tp / (tp + (fp + fn) / 2)`.
    pub fn f1_pass(&self) -> Result<f64, MetricError> {
        f1(self.tp, self.fp + self.fn_, "f1_pass")
    }

    /// F1 with fail taken as the positive class.
    pub fn f1_fail(&self) -> Result<f64, MetricError> {
        f1(self.tn, self.fp + self.fn_, "f1_fail")
    }
}

fn check_inputs(scores: &[f64], labels: &[Status]) -> Result<(), MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if scores.is_empty() {
        return Err(MetricError::Empty);
    }
    if let Some(&s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(MetricError::NonFiniteScore(s));
    }
    Ok(())
}

pub fn confusion(scores: &[f64], labels: &[Status], threshold: f64) -> Result<ConfusionMatrix, MetricError> {
    check_inputs(scores, labels)?;
    let mut cm = ConfusionMatrix::default();
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, Status::Pass) => cm.tp += 1,
            (true, Status::Fail) => cm.fp += 1,
            (false, Status::Fail) => cm.tn += 1,
            (false, Status::Pass) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

/// Area under the ROC curve with pass as positive, via average ranks (ties earn half credit).
pub fn roc_auc(scores: &[f64], labels: &[Status]) -> Result<f64, MetricError> {
    check_inputs(scores, labels)?;
    let p = labels.iter().filter(|&&l| l == Status::Pass).count();
    let n = labels.len() - p;
    if p == 0 {
        return Err(MetricError::SingleClass(Status::Fail));
    }
    if n == 0 {
        return Err(MetricError::SingleClass(Status::Pass));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the rank sum of positives, kept integral: a tie group spanning ranks
    // i+1..=j contributes (i+1+j) per member.
    let mut doubled_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k] == Status::Pass).count() as u128;
        doubled_rank_sum += pos_in_group * (i as u128 + 1 + j as u128);
        i = j;
    }
    let (p, n) = (p as u128, n as u128);
    let doubled_u = doubled_rank_sum - p * (p + 1);
    Ok(doubled_u as f64 / (2 * p * n) as f64)
}

/// Scores of one evaluated model; metrics that hit a zero denominator are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub positive_class: Status,
    pub threshold: f64,
    pub n: usize,
    pub auc: Option<f64>,
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub f1_fail: Option<f64>,
    pub f1_pass: Option<f64>,
    pub training_time_secs: f64,
    pub confusion: ConfusionMatrix,
}

pub fn evaluate(
    model: impl Into<String>,
    scores: &[f64],
    labels: &[Status],
    threshold: f64,
    training_time_secs: f64,
) -> Result<EvalReport, MetricError> {
    let cm = confusion(scores, labels, threshold)?;
    Ok(EvalReport {
        model: model.into(),
        positive_class: Status::Pass,
        threshold,
        n: scores.len(),
        auc: roc_auc(scores, labels).ok(),
        accuracy: cm.accuracy().ok(),
        sensitivity: cm.sensitivity().ok(),
        specificity: cm.specificity().ok(),
        f1_fail: cm.f1_fail().ok(),
        f1_pass: cm.f1_pass().ok(),
        training_time_secs,
        confusion: cm,
    })
}

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{:.2}%", 100.0 * x)).unwrap_or_else(|| "n/a".into())
}

/// Aligned text table, one row per report.
pub fn format_reports(reports: &[EvalReport]) -> String {
    let header = ["Model", "AUC", "Accuracy", "Sensitivity", "Specificity", "F1 (fail)", "Training time"];
    let rows: Vec<[String; 7]> = reports
        .iter()
        .map(|r| {
            [
                r.model.clone(),
                pct(r.auc),
                pct(r.accuracy),
                pct(r.sensitivity),
                pct(r.specificity),
                pct(r.f1_fail),
                format!("{:.2}s", r.training_time_secs),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let parts: Vec<String> = cells.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &header);
    for row in &rows {
        line(&mut out, &row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    if let Some(r) = reports.first() {
        let _ = writeln!(out, "positive class: {}, threshold {}", r.positive_class, r.threshold);
    }
    out
}
