use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{training_labels, ClassifierError};
use crate::corpus::{CheckRecord, LabelMode, Status};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RebalanceSpec {
    /// Majority records kept per minority record.
    pub target_ratio: f64,
    pub upweight: bool,
    pub seed: u64,
}

impl RebalanceSpec {
    pub fn new(target_ratio: f64, upweight: bool, seed: u64) -> Self {
        RebalanceSpec { target_ratio, upweight, seed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rebalanced {
    /// Retained positions into the input, ascending.
    pub indices: Vec<usize>,
    /// One weight per retained position.
    pub weights: Vec<f64>,
    pub minority: Status,
    pub minority_count: usize,
    pub majority_count: usize,
    /// Set when the ratio asked for more majority records than exist.
    pub warning: Option<String>,
}

/// Keep every minority record and a seeded sample of `floor(minority * ratio)` majority records.
///
/// The minority is the smaller class (fail on a tie). With `upweight`, each minority record
/// gets weight `majority_kept / minority` so both classes carry equal total weight.
pub fn rebalance_labels(labels: &[Status], spec: &RebalanceSpec) -> Result<Rebalanced, ClassifierError> {
    if !(spec.target_ratio.is_finite() && spec.target_ratio >= 1.0) {
        return Err(ClassifierError::InvalidRatio(spec.target_ratio));
    }
    let fail: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == Status::Fail).collect();
    let pass: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == Status::Pass).collect();
    if fail.is_empty() {
        return Err(ClassifierError::EmptyClass(Status::Fail));
    }
    if pass.is_empty() {
        return Err(ClassifierError::EmptyClass(Status::Pass));
    }
    let (minority, minor, mut major) = if fail.len() <= pass.len() {
        (Status::Fail, fail, pass)
    } else {
        (Status::Pass, pass, fail)
    };

    // Tolerance absorbs products like 100 * 1.15 landing just under an integer.
    let target = (minor.len() as f64 * spec.target_ratio + 1e-9).floor() as usize;
    let mut warning = None;
    if target >= major.len() {
        if target > major.len() {
            let msg = format!(
                "ratio {} wants {target} majority records but only {} exist; keeping all",
                spec.target_ratio,
                major.len()
            );
            log::warn!("{msg}");
            warning = Some(msg);
        }
    } else {
        major.shuffle(&mut seeded(spec.seed));
        major.truncate(target);
    }

    let minor_weight = if spec.upweight { major.len() as f64 / minor.len() as f64 } else { 1.0 };
    let (minority_count, majority_count) = (minor.len(), major.len());
    let mut tagged: Vec<(usize, f64)> =
        minor.into_iter().map(|i| (i, minor_weight)).chain(major.into_iter().map(|i| (i, 1.0))).collect();
    tagged.sort_unstable_by_key(|t| t.0);
    let (indices, weights) = tagged.into_iter().unzip();
    Ok(Rebalanced { indices, weights, minority, minority_count, majority_count, warning })
}

/// Record-level wrapper: returns the retained records with their weights.
pub fn rebalance(
    records: &[CheckRecord],
    spec: &RebalanceSpec,
    mode: LabelMode,
) -> Result<(Vec<CheckRecord>, Vec<f64>, Rebalanced), ClassifierError> {
    let labels = training_labels(records, mode)?;
    let plan = rebalance_labels(&labels, spec)?;
    let kept = plan.indices.iter().map(|&i| records[i].clone()).collect();
    Ok((kept, plan.weights.clone(), plan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(fail: usize, pass: usize) -> Vec<Status> {
        let mut v = vec![Status::Pass; pass];
        v.extend(std::iter::repeat_n(Status::Fail, fail));
        v
    }

    fn count(plan: &Rebalanced, l: &[Status], s: Status) -> usize {
        plan.indices.iter().filter(|&&i| l[i] == s).count()
    }

    #[test]
    fn large_ratio_example() {
        let l = labels(63_212, 1_000_000);
        let plan = rebalance_labels(&l, &RebalanceSpec::new(1.5, false, 7)).unwrap();
        assert_eq!(count(&plan, &l, Status::Fail), 63_212);
        assert_eq!(count(&plan, &l, Status::Pass), 94_818);
        assert!(plan.warning.is_none());
    }

    #[test]
    fn one_to_one_and_upweight() {
        let l = labels(100, 1500);
        let plan = rebalance_labels(&l, &RebalanceSpec::new(1.0, false, 1)).unwrap();
        assert_eq!((count(&plan, &l, Status::Fail), count(&plan, &l, Status::Pass)), (100, 100));

        let l = labels(100, 100);
        let plan = rebalance_labels(&l, &RebalanceSpec::new(1.0, true, 1)).unwrap();
        assert!(plan.weights.iter().all(|&w| w == 1.0));

        let l = labels(10, 200);
        let plan = rebalance_labels(&l, &RebalanceSpec::new(15.0, true, 1)).unwrap();
        let fail_w: f64 = plan.indices.iter().zip(&plan.weights).filter(|(&i, _)| l[i] == Status::Fail).map(|p| p.1).sum();
        assert_eq!(fail_w, 150.0);
    }

    #[test]
    fn overshoot_warns_and_keeps_all() {
        let l = labels(10, 50);
        let plan = rebalance_labels(&l, &RebalanceSpec::new(15.0, false, 1)).unwrap();
        assert_eq!(plan.indices.len(), 60);
        assert!(plan.warning.is_some());
    }

    #[test]
    fn errors() {
        assert!(matches!(
            rebalance_labels(&labels(0, 5), &RebalanceSpec::new(1.0, false, 1)),
            Err(ClassifierError::EmptyClass(Status::Fail))
        ));
        assert!(matches!(
            rebalance_labels(&labels(2, 5), &RebalanceSpec::new(0.5, false, 1)),
            Err(ClassifierError::InvalidRatio(_))
        ));
    }

    proptest! {
        #[test]
        fn minority_never_dropped(fail in 1usize..60, pass in 60usize..400, ratio in 1.0f64..8.0, seed in any::<u64>()) {
            let l = labels(fail, pass);
            let spec = RebalanceSpec::new(ratio, false, seed);
            let plan = rebalance_labels(&l, &spec).unwrap();
            prop_assert_eq!(count(&plan, &l, Status::Fail), fail);
            let want = ((fail as f64 * ratio + 1e-9).floor() as usize).min(pass);
            prop_assert_eq!(count(&plan, &l, Status::Pass), want);
            prop_assert!(plan.indices.windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(&plan, &rebalance_labels(&l, &spec).unwrap());
        }
    }
}
