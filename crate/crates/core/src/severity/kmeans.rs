//! k-means++ seeding and Lloyd iterations.
//!
//! Inertia is summed over points in index order. An update step is kept only if it
//! does not raise that sum, so the recorded trace is non-increasing in floating point,
//! not just in exact arithmetic.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SeverityError;
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Nearest centroid of every point, ties to the lowest index.
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Inertia after each assignment step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, cen) in centroids.iter().enumerate() {
        let d = sq_dist(p, cen);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn total(points: &[Vec<f64>], centroids: &[Vec<f64>], assign: &[usize]) -> f64 {
    points.iter().zip(assign).map(|(p, &a)| sq_dist(p, &centroids[a])).sum()
}

fn distinct_count(points: &[Vec<f64>]) -> usize {
    points.iter().map(|p| p.iter().map(|x| x.to_bits()).collect::<Vec<_>>()).collect::<HashSet<_>>().len()
}

fn validate(points: &[Vec<f64>], k: usize) -> Result<(), SeverityError> {
    if points.is_empty() {
        return Err(SeverityError::EmptyInput);
    }
    let d = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(SeverityError::DimensionMismatch { expected: d, got: p.len() });
    }
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(SeverityError::NonFinite);
    }
    let distinct = distinct_count(points);
    if k == 0 || k > distinct {
        return Err(SeverityError::InvalidK { k, distinct });
    }
    Ok(())
}

/// D²-weighted seeding.
fn plus_plus(points: &[Vec<f64>], k: usize, rng: &mut crate::rng::Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let sum: f64 = d2.iter().sum();
        let pick = if sum > 0.0 {
            let mut u = rng.gen::<f64>() * sum;
            let mut chosen = d2.iter().rposition(|&d| d > 0.0).unwrap_or(0);
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && u < d {
                    chosen = i;
                    break;
                }
                u -= d;
            }
            chosen
        } else {
            0
        };
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd iterations from given starting centroids.
pub fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> KMeansResult {
    let k = centroids.len();
    let dims = points[0].len();
    let mut assign = vec![usize::MAX; points.len()];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    loop {
        // assignment
        let mut changed = false;
        let mut dist = Vec::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
            dist.push(d);
        }
        let inertia: f64 = dist.iter().sum();
        trace.push(inertia);
        if !changed {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;

        // update
        let mut sums = vec![vec![0.0; dims]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut next = centroids.clone();
        for c in 0..k {
            if counts[c] > 0 {
                next[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        // reseed empty clusters at the points farthest from their centroid
        let mut taken: HashSet<usize> = HashSet::new();
        for c in (0..k).filter(|&c| counts[c] == 0) {
            let far = (0..points.len())
                .filter(|i| !taken.contains(i))
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
            if let Some(i) = far.filter(|&i| dist[i] > 0.0) {
                taken.insert(i);
                next[c] = points[i].clone();
            }
        }
        if total(points, &next, &assign) > inertia {
            // rounding made the means worse than the current centroids: stop here
            break;
        }
        centroids = next;
    }
    let inertia = *trace.last().expect("at least one assignment step");
    KMeansResult { k, centroids, assignments: assign, inertia, trace, iterations, converged }
}

/// One seeded k-means++ run.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<KMeansResult, SeverityError> {
    validate(points, k)?;
    let mut rng = seeded(seed);
    let init = plus_plus(points, k, &mut rng);
    Ok(lloyd(points, init, max_iter))
}

fn better(a: KMeansResult, b: KMeansResult) -> KMeansResult {
    if b.inertia < a.inertia {
        b
    } else {
        a
    }
}

/// Lowest-inertia run over `restarts` seeds, plus an optional warm start.
pub fn kmeans_best(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iter: usize,
    restarts: usize,
    warm: Option<Vec<Vec<f64>>>,
) -> Result<KMeansResult, SeverityError> {
    validate(points, k)?;
    let mut best: Option<KMeansResult> = None;
    for r in 0..restarts.max(1) {
        let run = kmeans(points, k, derive_seed(seed, r as u64), max_iter)?;
        best = Some(match best {
            None => run,
            Some(b) => better(b, run),
        });
    }
    if let Some(init) = warm {
        let run = lloyd(points, init, max_iter);
        best = best.map(|b| better(b, run));
    }
    Ok(best.expect("at least one restart"))
}

/// Previous solution plus the point farthest from it; Lloyd from here cannot end above the previous inertia.
pub(crate) fn grow_centroids(points: &[Vec<f64>], prev: &KMeansResult) -> Vec<Vec<f64>> {
    let far = (0..points.len())
        .max_by(|&a, &b| {
            let da = sq_dist(&points[a], &prev.centroids[prev.assignments[a]]);
            let db = sq_dist(&points[b], &prev.centroids[prev.assignments[b]]);
            da.total_cmp(&db).then(b.cmp(&a))
        })
        .expect("nonempty");
    let mut c = prev.centroids.clone();
    c.push(points[far].clone());
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowResult {
    pub chosen_k: usize,
    /// (k, inertia) for every k tried, ascending k.
    pub curve: Vec<(usize, f64)>,
    pub runs: Vec<KMeansResult>,
}

impl ElbowResult {
    pub fn run_for(&self, k: usize) -> Option<&KMeansResult> {
        self.runs.iter().find(|r| r.k == k)
    }

    pub fn curve_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["k", "inertia"]).expect("in-memory write");
        for (k, i) in &self.curve {
            w.write_record([k.to_string(), format!("{i:?}")]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Pick k at the largest second difference of the inertia curve; ties go to the smaller k.
pub fn choose_elbow(curve: &[(usize, f64)]) -> usize {
    let mut best = (curve[1].0, f64::NEG_INFINITY);
    for w in curve.windows(3) {
        let d2 = w[0].1 - 2.0 * w[1].1 + w[2].1;
        if d2 > best.1 {
            best = (w[1].0, d2);
        }
    }
    best.0
}

/// Fit every k in `ks` (consecutive, at least three values) and choose the elbow.
pub fn elbow_select(
    points: &[Vec<f64>],
    ks: std::ops::RangeInclusive<usize>,
    seed: u64,
    max_iter: usize,
    restarts: usize,
) -> Result<ElbowResult, SeverityError> {
    let (lo, hi) = (*ks.start(), *ks.end());
    if lo == 0 || hi < lo + 2 {
        return Err(SeverityError::InvalidRange { lo, hi });
    }
    validate(points, hi)?;
    let mut runs: Vec<KMeansResult> = Vec::new();
    for k in lo..=hi {
        let warm = runs.last().map(|prev| grow_centroids(points, prev));
        runs.push(kmeans_best(points, k, derive_seed(seed, k as u64), max_iter, restarts, warm)?);
    }
    let curve: Vec<(usize, f64)> = runs.iter().map(|r| (r.k, r.inertia)).collect();
    Ok(ElbowResult { chosen_k: choose_elbow(&curve), curve, runs })
}
