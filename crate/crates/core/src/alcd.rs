//! Minkowski distance kernels (fractional exponents allowed) and the average
//! leaf-community distance (ALCD) under feature permutation.
//!
//! The ALCD of a point is the pooled mean distance from the point to every
//! member of the leaf community it reaches in every tree: total distance over
//! all trees divided by total community size over all trees. Permuting a
//! feature column of the evaluation set and recomputing the ALCD measures how
//! far the permutation pushes points away from the training data the model
//! actually consults.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::stream;

/// Minkowski metric of positive order; fractional exponents are legal even
/// though the triangle inequality fails below 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    exponent: f64,
}

impl Metric {
    pub fn new(exponent: f64) -> Result<Metric> {
        if exponent <= 0.0 || !exponent.is_finite() {
            return Err(Error::NonPositiveExponent(exponent));
        }
        Ok(Metric { exponent })
    }

    pub fn euclidean() -> Metric {
        Metric { exponent: 2.0 }
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// `(sum_i |x_i - y_i|^e)^(1/e)` without length validation; callers check
    /// dimensions once at the boundary.
    #[inline]
    pub(crate) fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        if self.exponent == 2.0 {
            let mut acc = 0.0;
            for (a, b) in x.iter().zip(y) {
                let d = a - b;
                acc += d * d;
            }
            acc.sqrt()
        } else if self.exponent == 1.0 {
            x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()
        } else {
            let acc: f64 = x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b).abs().powf(self.exponent))
                .sum();
            acc.powf(1.0 / self.exponent)
        }
    }
}

impl Default for Metric {
    fn default() -> Self {
        Metric::euclidean()
    }
}

/// Minkowski distance between two equal-length vectors.
pub fn minkowski(x: &[f64], y: &[f64], metric: Metric) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    Ok(metric.distance(x, y))
}

/// Average leaf-community distance of a single point.
///
/// `train_features` must be the rows the forest was fitted on, in the same
/// (standardized) space as `x`. The result pools over trees: it is the total
/// distance divided by the total community size, not a mean of per-tree means.
pub fn point_alcd(
    forest: &Forest,
    x: &[f64],
    train_features: &[Vec<f64>],
    metric: Metric,
) -> Result<f64> {
    if x.len() != forest.n_features() {
        return Err(Error::DimensionMismatch {
            got: x.len(),
            expected: forest.n_features(),
        });
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for tree in &forest.trees {
        let community = tree.leaf_community(x)?;
        for &idx in community {
            total += metric.distance(x, &train_features[idx]);
        }
        count += community.len();
    }
    Ok(total / count as f64)
}

/// ALCDs for every evaluation point under `repetitions` independent
/// permutations of feature `feature`.
///
/// Row `r` of the result holds the ALCD of each evaluation point after its
/// `feature` column is rearranged by the `(seed, feature, r)` permutation
/// stream — the same stream the PFI computation uses for that key.
pub fn permuted_alcd(
    forest: &Forest,
    eval_set: &Dataset,
    train_features: &[Vec<f64>],
    feature: usize,
    repetitions: usize,
    metric: Metric,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if feature >= eval_set.p() {
        return Err(Error::UnknownFeature {
            index: feature,
            p: eval_set.p(),
        });
    }
    if eval_set.n() == 0 {
        return Err(Error::EmptyEvaluationSet);
    }
    if repetitions == 0 {
        return Err(Error::NoRepetitions);
    }
    let m = eval_set.n();
    let mut out = Vec::with_capacity(repetitions);
    for rep in 0..repetitions {
        let perm = stream::permutation(seed, feature, rep, m);
        let row: Result<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|i| {
                let mut point = eval_set.row(i).to_vec();
                point[feature] = eval_set.row(perm[i])[feature];
                point_alcd(forest, &point, train_features, metric)
            })
            .collect();
        out.push(row?);
    }
    Ok(out)
}

/// Per-(feature, repetition, point) ALCD tensor, baseline column included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlcdTable {
    /// `values[feature][repetition][point]`.
    values: Vec<Vec<Vec<f64>>>,
    feature_names: Vec<String>,
    baseline: Option<usize>,
    metric: Metric,
    seed: u64,
    repetitions: usize,
    n_points: usize,
}

impl AlcdTable {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn repetitions(&self) -> usize {
        self.repetitions
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Index of the baseline column, when present.
    pub fn baseline_index(&self) -> Option<usize> {
        self.baseline
    }

    pub fn entry(&self, feature: usize, repetition: usize, point: usize) -> f64 {
        self.values[feature][repetition][point]
    }

    /// All point ALCDs for one (feature, repetition) pair.
    pub fn slice(&self, feature: usize, repetition: usize) -> &[f64] {
        &self.values[feature][repetition]
    }

    /// Mean ALCD over repetitions and points for one feature.
    pub fn feature_mean(&self, feature: usize) -> f64 {
        let reps = &self.values[feature];
        let total: f64 = reps.iter().flat_map(|r| r.iter()).sum();
        total / (reps.len() * self.n_points) as f64
    }

    /// Flat CSV: `feature,repetition,point_index,alcd`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("feature,repetition,point_index,alcd\n");
        for (j, reps) in self.values.iter().enumerate() {
            for (r, points) in reps.iter().enumerate() {
                for (i, v) in points.iter().enumerate() {
                    let _ = writeln!(out, "{},{},{},{}", self.feature_names[j], r, i, v);
                }
            }
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_csv_string()).map_err(|source| Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }

    /// JSON header describing how the table was produced.
    pub fn metadata_json(&self) -> serde_json::Value {
        serde_json::json!({
            "metric_exponent": self.metric.exponent(),
            "seed": self.seed,
            "repetitions": self.repetitions,
            "n_points": self.n_points,
            "feature_names": self.feature_names,
            "baseline_index": self.baseline,
        })
    }
}

/// Builds the full ALCD table: every feature of the evaluation set (baseline
/// included) is permuted `repetitions` times against the shared evaluation
/// points.
pub fn build_alcd_table(
    forest: &Forest,
    eval_set: &Dataset,
    train_features: &[Vec<f64>],
    repetitions: usize,
    metric: Metric,
    seed: u64,
) -> Result<AlcdTable> {
    let p = eval_set.p();
    let values: Result<Vec<Vec<Vec<f64>>>> = (0..p)
        .map(|j| permuted_alcd(forest, eval_set, train_features, j, repetitions, metric, seed))
        .collect();
    Ok(AlcdTable {
        values: values?,
        feature_names: eval_set.feature_names().to_vec(),
        baseline: eval_set.baseline_index(),
        metric,
        seed,
        repetitions,
        n_points: eval_set.n(),
    })
}
