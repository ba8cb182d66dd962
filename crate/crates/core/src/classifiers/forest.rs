use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{RecordEncoder, TopWordsEncoder};
use super::{class_index, normalized_weights, ClassifierError, PassProbability};
use crate::corpus::{CheckRecord, Status};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    /// Features tried per split; `None` means the square root of the column count.
    pub max_features: Option<usize>,
    /// Vocabulary kept per text field.
    pub top_words: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: Some(16),
            min_samples_leaf: 1,
            bootstrap: true,
            max_features: None,
            top_words: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// Weighted class mass in (fail, pass) order; the total is always positive.
    Leaf { counts: [f64; 2] },
    /// Rows with `value <= threshold` go left.
    Split { feature: u32, threshold: u16, left: u32, right: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    fn leaf(&self, value: impl Fn(u32) -> u16) -> &[f64; 2] {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Split { feature, threshold, left, right } => {
                    i = if value(*feature) <= *threshold { *left as usize } else { *right as usize };
                }
            }
        }
    }

    /// Pass frequency of the leaf reached by a sparse row.
    pub fn predict_sparse(&self, row: &[(u32, u16)]) -> f64 {
        let c = self.leaf(|f| row.binary_search_by_key(&f, |e| e.0).map(|p| row[p].1).unwrap_or(0));
        c[1] / (c[0] + c[1])
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestClassifier {
    pub encoder: TopWordsEncoder,
    pub trees: Vec<Tree>,
    pub params: ForestParams,
}

impl RandomForestClassifier {
    pub fn predict_sparse(&self, row: &[(u32, u16)]) -> f64 {
        self.trees.iter().map(|t| t.predict_sparse(row)).sum::<f64>() / self.trees.len() as f64
    }
}

impl PassProbability for RandomForestClassifier {
    fn predict_proba(&self, record: &CheckRecord) -> f64 {
        self.predict_sparse(&self.encoder.encode(record))
    }
}

/// Column-major dense count matrix.
struct Columns {
    data: Vec<Vec<u16>>,
}

impl Columns {
    fn build(rows: &[Vec<(u32, u16)>], width: usize) -> Self {
        let mut data = vec![vec![0u16; rows.len()]; width];
        for (r, row) in rows.iter().enumerate() {
            for &(c, v) in row {
                data[c as usize][r] = v;
            }
        }
        Columns { data }
    }
}

struct Split {
    feature: usize,
    threshold: u16,
    score: f64,
}

struct TreeBuilder<'a> {
    cols: &'a Columns,
    ys: &'a [usize],
    ws: &'a [f64],
    params: &'a ForestParams,
    mtry: usize,
    perm: Vec<usize>,
    hist: Vec<[f64; 3]>,
}

fn weighted_impurity(c0: f64, c1: f64) -> f64 {
    let t = c0 + c1;
    if t <= 0.0 {
        0.0
    } else {
        t - (c0 * c0 + c1 * c1) / t
    }
}

impl TreeBuilder<'_> {
    fn mass(&self, rows: &[usize]) -> [f64; 2] {
        let mut c = [0.0; 2];
        for &r in rows {
            c[self.ys[r]] += self.ws[r];
        }
        c
    }

    /// Best threshold on one feature, or `None` if it is constant over `rows`.
    fn best_on(&mut self, feature: usize, rows: &[usize]) -> Option<Option<Split>> {
        let col = &self.cols.data[feature];
        let (mut lo, mut hi) = (u16::MAX, 0u16);
        for &r in rows {
            lo = lo.min(col[r]);
            hi = hi.max(col[r]);
        }
        if lo == hi {
            return None;
        }
        let min_leaf = self.params.min_samples_leaf.max(1) as f64;
        let span = (hi - lo) as usize + 1;
        let mut best: Option<Split> = None;
        let mut consider = |threshold: u16, l: [f64; 3], total: [f64; 3]| {
            if l[2] < min_leaf || total[2] - l[2] < min_leaf {
                return;
            }
            let score = weighted_impurity(l[0], l[1]) + weighted_impurity(total[0] - l[0], total[1] - l[1]);
            if best.as_ref().is_none_or(|b| score < b.score) {
                best = Some(Split { feature, threshold, score });
            }
        };
        if span <= 4096 {
            self.hist.clear();
            self.hist.resize(span, [0.0; 3]);
            for &r in rows {
                let h = &mut self.hist[(col[r] - lo) as usize];
                h[self.ys[r]] += self.ws[r];
                h[2] += 1.0;
            }
            let total = self.hist.iter().fold([0.0; 3], |a, h| [a[0] + h[0], a[1] + h[1], a[2] + h[2]]);
            let mut l = [0.0; 3];
            for (v, h) in self.hist.iter().enumerate().take(span - 1) {
                if h[2] == 0.0 {
                    continue;
                }
                l = [l[0] + h[0], l[1] + h[1], l[2] + h[2]];
                consider(lo + v as u16, l, total);
            }
        } else {
            let mut vals: Vec<(u16, usize)> = rows.iter().map(|&r| (col[r], r)).collect();
            vals.sort_unstable();
            let mut total = [0.0; 3];
            for &(_, r) in &vals {
                total[self.ys[r]] += self.ws[r];
                total[2] += 1.0;
            }
            let mut l = [0.0; 3];
            for i in 0..vals.len() - 1 {
                let r = vals[i].1;
                l[self.ys[r]] += self.ws[r];
                l[2] += 1.0;
                if vals[i].0 != vals[i + 1].0 {
                    consider(vals[i].0, l, total);
                }
            }
        }
        Some(best)
    }

    /// Sample features without replacement until `mtry` non-constant ones with a legal split are seen.
    fn choose_split(&mut self, rows: &[usize], rng: &mut crate::rng::Rng) -> Option<Split> {
        let f = self.perm.len();
        let mut found = 0;
        let mut best: Option<Split> = None;
        for j in 0..f {
            let k = rng.gen_range(j..f);
            self.perm.swap(j, k);
            let feature = self.perm[j];
            if let Some(Some(s)) = self.best_on(feature, rows) {
                found += 1;
                if best.as_ref().is_none_or(|b| s.score < b.score) {
                    best = Some(s);
                }
                if found >= self.mtry {
                    break;
                }
            }
        }
        best
    }

    fn grow(&mut self, mut rows: Vec<usize>, rng: &mut crate::rng::Rng) -> Tree {
        let mut nodes = vec![Node::Leaf { counts: [0.0; 2] }];
        let mut stack = vec![(0usize, 0usize, rows.len(), 0usize)];
        let mut scratch = Vec::with_capacity(rows.len());
        while let Some((id, start, end, depth)) = stack.pop() {
            let slice = &rows[start..end];
            let counts = self.mass(slice);
            let pure = counts[0] == 0.0 || counts[1] == 0.0;
            let deep = self.params.max_depth.is_some_and(|d| depth >= d);
            let small = slice.len() < 2 * self.params.min_samples_leaf.max(1);
            let split = if pure || deep || small { None } else { self.choose_split(slice, rng) };
            let Some(split) = split else {
                nodes[id] = Node::Leaf { counts };
                continue;
            };
            let col = &self.cols.data[split.feature];
            scratch.clear();
            scratch.extend(slice.iter().copied().filter(|&r| col[r] <= split.threshold));
            let mid = start + scratch.len();
            scratch.extend(slice.iter().copied().filter(|&r| col[r] > split.threshold));
            rows[start..end].copy_from_slice(&scratch);

            let (left, right) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf { counts: [0.0; 2] });
            nodes.push(Node::Leaf { counts: [0.0; 2] });
            nodes[id] = Node::Split {
                feature: split.feature as u32,
                threshold: split.threshold,
                left: left as u32,
                right: right as u32,
            };
            stack.push((right, mid, end, depth + 1));
            stack.push((left, start, mid, depth + 1));
        }
        Tree { nodes }
    }
}

/// Bagged Gini trees over top-word counts and one-hot categoricals.
pub fn train_random_forest(
    records: &[CheckRecord],
    labels: &[Status],
    weights: Option<&[f64]>,
    encoder: RecordEncoder,
    params: &ForestParams,
) -> Result<RandomForestClassifier, ClassifierError> {
    if records.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    if records.len() != labels.len() {
        return Err(ClassifierError::LengthMismatch { what: "labels", left: labels.len(), right: records.len() });
    }
    if params.n_trees == 0 {
        return Err(ClassifierError::InvalidConfig("n_trees must be positive".into()));
    }
    let n = records.len();
    let ws = normalized_weights(weights, n)?;
    let ys: Vec<usize> = labels.iter().map(|&s| class_index(s)).collect();
    let top = TopWordsEncoder::fit(records, encoder, params.top_words)?;
    let rows: Vec<Vec<(u32, u16)>> = records.iter().map(|r| top.encode(r)).collect();
    let cols = Columns::build(&rows, top.width);
    let mtry = params.max_features.unwrap_or_else(|| (top.width as f64).sqrt().round() as usize).clamp(1, top.width);

    let trees: Vec<Tree> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeded(derive_seed(params.seed, t as u64));
            let sample: Vec<usize> =
                if params.bootstrap { (0..n).map(|_| rng.gen_range(0..n)).collect() } else { (0..n).collect() };
            let mut builder = TreeBuilder {
                cols: &cols,
                ys: &ys,
                ws: &ws,
                params,
                mtry,
                perm: (0..top.width).collect(),
                hist: Vec::new(),
            };
            builder.grow(sample, &mut rng)
        })
        .collect();

    Ok(RandomForestClassifier { encoder: top, trees, params: params.clone() })
}
