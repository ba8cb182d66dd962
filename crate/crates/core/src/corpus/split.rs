use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::record::{CheckRecord, Status};
use super::CorpusError;
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratify {
    None,
    /// Allocate pass and fail records separately so both appear on each side.
    #[default]
    ByIoq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<CheckRecord>,
    pub test: Vec<CheckRecord>,
    pub seed: u64,
}

pub fn split_train_test(
    records: &[CheckRecord],
    train_fraction: f64,
    seed: u64,
    stratify: Stratify,
) -> Result<DatasetSplit, CorpusError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(train_fraction));
    }
    let n = records.len();
    if n < 2 {
        return Err(CorpusError::TooFewRecords { needed: 2, got: n });
    }

    let strata: Vec<Vec<usize>> = match stratify {
        Stratify::None => vec![(0..n).collect()],
        Stratify::ByIoq => {
            let mut fail = Vec::new();
            let mut pass = Vec::new();
            for (i, r) in records.iter().enumerate() {
                match r.ioq_status {
                    Some(Status::Fail) => fail.push(i),
                    Some(Status::Pass) => pass.push(i),
                    None => return Err(CorpusError::MissingLabel { id: r.id.clone() }),
                }
            }
            if fail.is_empty() {
                return Err(CorpusError::EmptyClass { class: Status::Fail });
            }
            if pass.is_empty() {
                return Err(CorpusError::EmptyClass { class: Status::Pass });
            }
            vec![fail, pass]
        }
    };

    let sizes: Vec<usize> = strata.iter().map(Vec::len).collect();
    let quotas = allocate(&sizes, train_fraction);

    let mut rng = seeded(seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (mut members, quota) in strata.into_iter().zip(quotas) {
        members.shuffle(&mut rng);
        train_idx.extend_from_slice(&members[..quota]);
        test_idx.extend_from_slice(&members[quota..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    Ok(DatasetSplit {
        train: train_idx.into_iter().map(|i| records[i].clone()).collect(),
        test: test_idx.into_iter().map(|i| records[i].clone()).collect(),
        seed,
    })
}

/// Per-stratum training counts summing to `round(fraction * n)`, by largest remainder.
/// Strata with at least two members keep at least one record on each side.
fn allocate(sizes: &[usize], fraction: f64) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    let target = ((fraction * n as f64).round() as usize).clamp(1, n - 1);

    let mut quotas: Vec<usize> = sizes.iter().map(|&s| (fraction * s as f64).floor() as usize).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = fraction * sizes[a] as f64 - quotas[a] as f64;
        let rb = fraction * sizes[b] as f64 - quotas[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut assigned: usize = quotas.iter().sum();
    for &i in order.iter().cycle().take(order.len() * 2) {
        if assigned >= target {
            break;
        }
        if quotas[i] < sizes[i] {
            quotas[i] += 1;
            assigned += 1;
        }
    }

    for i in 0..sizes.len() {
        if sizes[i] < 2 {
            continue;
        }
        if quotas[i] == 0 {
            quotas[i] = 1;
            if let Some(j) = donor(&quotas, sizes, i, |q, s| q > 1 || (s < 2 && q > 0)) {
                quotas[j] -= 1;
            }
        } else if quotas[i] == sizes[i] {
            quotas[i] -= 1;
            if let Some(j) = donor(&quotas, sizes, i, |q, s| q + 1 < s) {
                quotas[j] += 1;
            }
        }
    }
    quotas
}

fn donor(quotas: &[usize], sizes: &[usize], skip: usize, ok: impl Fn(usize, usize) -> bool) -> Option<usize> {
    (0..sizes.len())
        .filter(|&j| j != skip && ok(quotas[j], sizes[j]))
        .max_by_key(|&j| (sizes[j], usize::MAX - j))
}
