//! CART-style decision trees and bagged random forests.
//!
//! Each leaf retains the distinct indices of the in-bag training rows that
//! reached it: the rows a tree's prediction is actually computed from. These
//! leaf communities are what the distance computations downstream consume.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::stream;

const GAIN_EPS: f64 = 1e-12;

/// Forest hyperparameters. `None` fields resolve to the untuned defaults of
/// standard random forests: mtry = floor(sqrt(p)) for classification and
/// max(1, floor(p/3)) for regression; min_leaf = 1 for classification and 5
/// for regression; no depth cap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    pub mtry: Option<usize>,
    pub min_leaf: Option<usize>,
    pub max_depth: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: 500,
            mtry: None,
            min_leaf: None,
            max_depth: None,
        }
    }
}

/// Hyperparameters after defaults are resolved against a concrete dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub trees: usize,
    pub mtry: usize,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
}

impl ForestParams {
    fn resolve(&self, task: Task, n: usize, p: usize) -> Result<ResolvedParams> {
        if self.trees == 0 {
            return Err(Error::NoTrees);
        }
        let mtry = self.mtry.unwrap_or(match task {
            Task::Classification => ((p as f64).sqrt().floor() as usize).max(1),
            Task::Regression => (p / 3).max(1),
        });
        if mtry == 0 || mtry > p {
            return Err(Error::MtryOutOfRange { mtry, p });
        }
        let min_leaf = self.min_leaf.unwrap_or(match task {
            Task::Classification => 1,
            Task::Regression => 5,
        });
        if min_leaf == 0 || min_leaf > n {
            return Err(Error::MinLeafTooLarge { min_leaf, n });
        }
        Ok(ResolvedParams {
            trees: self.trees,
            mtry,
            min_leaf,
            max_depth: self.max_depth,
        })
    }
}

/// Leaf payload: class proportions over the in-bag multiset, or the mean
/// response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LeafValue {
    Mean(f64),
    Distribution(Vec<f64>),
}

/// A tree node. Rows with `x[feature] <= threshold` go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Internal {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        /// Distinct in-bag training-row indices in this leaf.
        community: Vec<usize>,
        value: LeafValue,
    },
}

impl Node {
    fn leaf_for(&self, x: &[f64]) -> &Node {
        let mut node = self;
        loop {
            match node {
                Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
                Node::Leaf { .. } => return node,
            }
        }
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Node>) {
        match self {
            Node::Internal { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
            Node::Leaf { .. } => out.push(self),
        }
    }
}

/// One fitted tree together with its bootstrap sample (a multiset of row
/// indices).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub root: Node,
    pub in_bag: Vec<usize>,
    pub(crate) n_features: usize,
}

impl Tree {
    /// The distinct training-row indices of the leaf that `x` reaches.
    pub fn leaf_community(&self, x: &[f64]) -> Result<&[usize]> {
        self.check_dim(x)?;
        match self.root.leaf_for(x) {
            Node::Leaf { community, .. } => Ok(community),
            Node::Internal { .. } => unreachable!(),
        }
    }

    /// The payload of the leaf that `x` reaches.
    pub fn leaf_value(&self, x: &[f64]) -> Result<&LeafValue> {
        self.check_dim(x)?;
        match self.root.leaf_for(x) {
            Node::Leaf { value, .. } => Ok(value),
            Node::Internal { .. } => unreachable!(),
        }
    }

    /// All leaves, left-to-right.
    pub fn leaves(&self) -> Vec<&Node> {
        let mut out = Vec::new();
        self.root.collect_leaves(&mut out);
        out
    }

    /// Distinct in-bag indices, sorted.
    pub fn distinct_in_bag(&self) -> Vec<usize> {
        let mut v = self.in_bag.clone();
        v.sort_unstable();
        v.dedup();
        v
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                got: x.len(),
                expected: self.n_features,
            });
        }
        Ok(())
    }
}

/// A prediction from a forest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Prediction {
    Value(f64),
    Class(usize),
}

impl Prediction {
    pub fn as_value(&self) -> f64 {
        match self {
            Prediction::Value(v) => *v,
            Prediction::Class(_) => panic!("classification prediction"),
        }
    }

    pub fn as_class(&self) -> usize {
        match self {
            Prediction::Class(c) => *c,
            Prediction::Value(_) => panic!("regression prediction"),
        }
    }
}

/// A bagged ensemble of trees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub params: ResolvedParams,
    pub task: Task,
    pub seed: u64,
    pub(crate) n_features: usize,
    pub(crate) n_classes: usize,
}

impl Forest {
    /// Trains a forest: each tree grows on a bootstrap sample of `train`
    /// (n draws with replacement), testing `mtry` features per split, with the
    /// best split chosen by Gini impurity decrease (classification) or
    /// variance reduction (regression).
    ///
    /// Per-tree RNG streams are keyed `(seed, tree_index)`, so the result is
    /// independent of the parallel schedule.
    pub fn fit(train: &Dataset, params: &ForestParams, seed: u64) -> Result<Forest> {
        let n = train.n();
        let p = train.p();
        let task = train.task();
        let resolved = params.resolve(task, n, p)?;
        let targets = TargetView::from(train);

        let trees: Vec<Tree> = (0..resolved.trees)
            .into_par_iter()
            .map(|tree_idx| {
                let mut rng = stream::rng(seed, &[stream::TAG_TREE, tree_idx as u64]);
                let in_bag: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                let builder = TreeBuilder {
                    features: train.features(),
                    targets: &targets,
                    p,
                    params: resolved,
                };
                let root = builder.grow(in_bag.clone(), 0, &mut rng);
                Tree {
                    root,
                    in_bag,
                    n_features: p,
                }
            })
            .collect();

        Ok(Forest {
            trees,
            params: resolved,
            task,
            seed,
            n_features: p,
            n_classes: match train.task() {
                Task::Classification => train.classification_targets().1,
                Task::Regression => 0,
            },
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Ensemble prediction: mean of leaf means (regression) or argmax of the
    /// summed leaf class distributions, ties to the lowest class index
    /// (classification).
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                got: x.len(),
                expected: self.n_features,
            });
        }
        match self.task {
            Task::Regression => {
                let mut total = 0.0;
                for tree in &self.trees {
                    match tree.leaf_value(x)? {
                        LeafValue::Mean(m) => total += m,
                        LeafValue::Distribution(_) => unreachable!(),
                    }
                }
                Ok(Prediction::Value(total / self.trees.len() as f64))
            }
            Task::Classification => {
                let mut scores = vec![0.0; self.n_classes];
                for tree in &self.trees {
                    match tree.leaf_value(x)? {
                        LeafValue::Distribution(dist) => {
                            for (s, d) in scores.iter_mut().zip(dist) {
                                *s += d;
                            }
                        }
                        LeafValue::Mean(_) => unreachable!(),
                    }
                }
                let mut best = 0;
                for (c, &s) in scores.iter().enumerate() {
                    if s > scores[best] {
                        best = c;
                    }
                }
                Ok(Prediction::Class(best))
            }
        }
    }
}

/// Versioned serialization wrapper for experiment resumption.
#[derive(Debug, Serialize, Deserialize)]
pub struct ForestDocument {
    pub version: u32,
    pub forest: Forest,
}

impl ForestDocument {
    pub const VERSION: u32 = 1;

    pub fn to_json(forest: &Forest) -> Result<String> {
        let doc = ForestDocument {
            version: Self::VERSION,
            forest: forest.clone(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Forest> {
        let doc: ForestDocument = serde_json::from_str(text)?;
        Ok(doc.forest)
    }
}

enum TargetView<'a> {
    Regression(&'a [f64]),
    Classification { labels: &'a [usize], n_classes: usize },
}

impl<'a> TargetView<'a> {
    fn from(ds: &'a Dataset) -> Self {
        match ds.task() {
            Task::Regression => TargetView::Regression(ds.regression_targets()),
            Task::Classification => {
                let (labels, n_classes) = ds.classification_targets();
                TargetView::Classification { labels, n_classes }
            }
        }
    }
}

struct TreeBuilder<'a> {
    features: &'a [Vec<f64>],
    targets: &'a TargetView<'a>,
    p: usize,
    params: ResolvedParams,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl TreeBuilder<'_> {
    fn grow(&self, rows: Vec<usize>, depth: usize, rng: &mut impl Rng) -> Node {
        let n = rows.len();
        debug_assert!(n > 0);

        let depth_capped = self
            .params
            .max_depth
            .map(|d| depth >= d)
            .unwrap_or(false);
        if depth_capped || self.is_pure(&rows) || n < 2 * self.params.min_leaf {
            return self.leaf(rows);
        }

        let candidates = self.sample_features(rng);
        let mut best: Option<BestSplit> = None;
        for &feature in &candidates {
            if let Some(split) = self.best_split_on(&rows, feature) {
                let better = match &best {
                    None => true,
                    Some(b) => split.gain > b.gain,
                };
                if better {
                    best = Some(split);
                }
            }
        }

        match best {
            Some(split) if split.gain > GAIN_EPS => {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                    .into_iter()
                    .partition(|&r| self.features[r][split.feature] <= split.threshold);
                debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());
                let left = self.grow(left_rows, depth + 1, rng);
                let right = self.grow(right_rows, depth + 1, rng);
                Node::Internal {
                    feature: split.feature,
                    threshold: split.threshold,
                    left: Box::new(left),
                    right: Box::new(right),
                }
            }
            _ => self.leaf(rows),
        }
    }

    /// Features tried at this split: `mtry` sampled without replacement,
    /// scanned in ascending index order so tie-breaking is reproducible.
    fn sample_features(&self, rng: &mut impl Rng) -> Vec<usize> {
        if self.params.mtry == self.p {
            return (0..self.p).collect();
        }
        let mut pool: Vec<usize> = (0..self.p).collect();
        for i in 0..self.params.mtry {
            let j = rng.gen_range(i..pool.len());
            pool.swap(i, j);
        }
        let mut chosen = pool[..self.params.mtry].to_vec();
        chosen.sort_unstable();
        chosen
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        match self.targets {
            TargetView::Regression(y) => {
                let first = y[rows[0]];
                rows.iter().all(|&r| y[r] == first)
            }
            TargetView::Classification { labels, .. } => {
                let first = labels[rows[0]];
                rows.iter().all(|&r| labels[r] == first)
            }
        }
    }

    fn leaf(&self, rows: Vec<usize>) -> Node {
        let n = rows.len() as f64;
        let value = match self.targets {
            TargetView::Regression(y) => {
                LeafValue::Mean(rows.iter().map(|&r| y[r]).sum::<f64>() / n)
            }
            TargetView::Classification { labels, n_classes } => {
                let mut counts = vec![0.0; *n_classes];
                for &r in &rows {
                    counts[labels[r]] += 1.0;
                }
                for c in counts.iter_mut() {
                    *c /= n;
                }
                LeafValue::Distribution(counts)
            }
        };
        let mut community = rows;
        community.sort_unstable();
        community.dedup();
        Node::Leaf { community, value }
    }

    /// Best threshold on one feature: thresholds are midpoints between
    /// adjacent distinct sorted values, both children must keep `min_leaf`
    /// rows, and equal gains keep the smallest threshold.
    fn best_split_on(&self, rows: &[usize], feature: usize) -> Option<BestSplit> {
        let n = rows.len();
        let mut ordered: Vec<(f64, usize)> = rows
            .iter()
            .map(|&r| (self.features[r][feature], r))
            .collect();
        ordered.sort_by(|a, b| a.0.total_cmp(&b.0));
        if ordered[0].0 == ordered[n - 1].0 {
            return None;
        }

        let min_leaf = self.params.min_leaf;
        let mut best: Option<BestSplit> = None;

        match self.targets {
            TargetView::Classification { labels, n_classes } => {
                let mut total = vec![0usize; *n_classes];
                for &(_, r) in &ordered {
                    total[labels[r]] += 1;
                }
                let parent = gini(&total, n);
                let mut left = vec![0usize; *n_classes];
                for i in 0..n - 1 {
                    left[labels[ordered[i].1]] += 1;
                    if ordered[i].0 == ordered[i + 1].0 {
                        continue;
                    }
                    let nl = i + 1;
                    let nr = n - nl;
                    if nl < min_leaf || nr < min_leaf {
                        continue;
                    }
                    let mut right = total.clone();
                    for (rc, lc) in right.iter_mut().zip(&left) {
                        *rc -= lc;
                    }
                    let gain = parent
                        - (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
                    if best.as_ref().map(|b| gain > b.gain).unwrap_or(true) {
                        best = Some(BestSplit {
                            feature,
                            threshold: midpoint(ordered[i].0, ordered[i + 1].0),
                            gain,
                        });
                    }
                }
            }
            TargetView::Regression(y) => {
                let mut sum = 0.0;
                let mut sumsq = 0.0;
                for &(_, r) in &ordered {
                    sum += y[r];
                    sumsq += y[r] * y[r];
                }
                let sse_parent = sse(sum, sumsq, n);
                let mut left_sum = 0.0;
                let mut left_sumsq = 0.0;
                for i in 0..n - 1 {
                    let yi = y[ordered[i].1];
                    left_sum += yi;
                    left_sumsq += yi * yi;
                    if ordered[i].0 == ordered[i + 1].0 {
                        continue;
                    }
                    let nl = i + 1;
                    let nr = n - nl;
                    if nl < min_leaf || nr < min_leaf {
                        continue;
                    }
                    let sse_l = sse(left_sum, left_sumsq, nl);
                    let sse_r = sse(sum - left_sum, sumsq - left_sumsq, nr);
                    let gain = (sse_parent - sse_l - sse_r) / n as f64;
                    if best.as_ref().map(|b| gain > b.gain).unwrap_or(true) {
                        best = Some(BestSplit {
                            feature,
                            threshold: midpoint(ordered[i].0, ordered[i + 1].0),
                            gain,
                        });
                    }
                }
            }
        }
        best
    }
}

fn gini(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let f = c as f64 / n;
            f * f
        })
        .sum::<f64>()
}

fn sse(sum: f64, sumsq: f64, n: usize) -> f64 {
    (sumsq - sum * sum / n as f64).max(0.0)
}

fn midpoint(a: f64, b: f64) -> f64 {
    a + (b - a) / 2.0
}
