use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{DuplicatePair, Tier};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierRow {
    pub category: String,
    pub number: usize,
    pub percentage: f64,
}

/// Checks per tier, each check counted once at the highest tier of any pair it is in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupReport {
    pub total_checks: usize,
    pub rows: Vec<TierRow>,
    pub total: TierRow,
}

pub fn dedup_report(total_checks: usize, pairs: &[DuplicatePair]) -> DedupReport {
    let mut best: HashMap<&str, Tier> = HashMap::new();
    for p in pairs {
        for id in [p.id_a.as_str(), p.id_b.as_str()] {
            let e = best.entry(id).or_insert(p.tier);
            *e = (*e).max(p.tier);
        }
    }
    let pct = |n: usize| if total_checks == 0 { 0.0 } else { 100.0 * n as f64 / total_checks as f64 };
    let rows: Vec<TierRow> = Tier::ALL
        .iter()
        .map(|&t| {
            let number = best.values().filter(|&&b| b == t).count();
            TierRow { category: t.to_string(), number, percentage: pct(number) }
        })
        .collect();
    let number = rows.iter().map(|r| r.number).sum();
    DedupReport { total_checks, rows, total: TierRow { category: "Total".into(), number, percentage: pct(number) } }
}

impl DedupReport {
    pub fn number(&self, tier: Tier) -> usize {
        self.rows.iter().find(|r| r.category == tier.as_str()).map_or(0, |r| r.number)
    }

    /// Category, Number, Percentage columns.
    pub fn to_table(&self) -> String {
        let all: Vec<&TierRow> = self.rows.iter().chain(std::iter::once(&self.total)).collect();
        let cells: Vec<[String; 3]> =
            all.iter().map(|r| [r.category.clone(), r.number.to_string(), format!("{:.0}%", r.percentage)]).collect();
        let header = ["Category", "Number", "Percentage"];
        let mut w = header.map(str::len);
        for c in &cells {
            for k in 0..3 {
                w[k] = w[k].max(c[k].len());
            }
        }
        let mut out = format!("{:<a$}  {:>b$}  {:>c$}\n", header[0], header[1], header[2], a = w[0], b = w[1], c = w[2]);
        for c in &cells {
            out.push_str(&format!("{:<a$}  {:>b$}  {:>c$}\n", c[0], c[1], c[2], a = w[0], b = w[1], c = w[2]));
        }
        out
    }
}
