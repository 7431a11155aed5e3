//! Permutation feature importance on held-out data, plus a permute-and-relearn
//! importance oracle.
//!
//! PFI permutes a feature column of the evaluation copy and reports the error
//! increase; the forest is never refit. The relearn oracle instead permutes
//! the column in the training data and refits, which removes the feature's
//! signal without ever evaluating the model off the training distribution.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::forest::{Forest, ForestParams};
use crate::stream;

/// Error measure: misclassification rate for classification, mean squared
/// error for regression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMetric {
    MisclassificationRate,
    MeanSquaredError,
}

impl ErrorMetric {
    pub fn for_task(task: Task) -> ErrorMetric {
        match task {
            Task::Classification => ErrorMetric::MisclassificationRate,
            Task::Regression => ErrorMetric::MeanSquaredError,
        }
    }
}

/// Prediction error of a forest on a dataset.
pub fn eval_error(forest: &Forest, ds: &Dataset) -> Result<f64> {
    let n = ds.n() as f64;
    match ds.task() {
        Task::Regression => {
            let y = ds.regression_targets();
            let mut acc = 0.0;
            for (row, &target) in ds.features().iter().zip(y) {
                let d = forest.predict(row)?.as_value() - target;
                acc += d * d;
            }
            Ok(acc / n)
        }
        Task::Classification => {
            let (labels, _) = ds.classification_targets();
            let mut wrong = 0usize;
            for (row, &label) in ds.features().iter().zip(labels) {
                if forest.predict(row)?.as_class() != label {
                    wrong += 1;
                }
            }
            Ok(wrong as f64 / n)
        }
    }
}

/// PFI of one feature: for each repetition, the error on the evaluation set
/// with column `feature` permuted, minus the unpermuted error.
///
/// Permutations come from the `(seed, feature, repetition)` streams shared
/// with [`crate::alcd::build_alcd_table`].
pub fn pfi(
    forest: &Forest,
    eval_set: &Dataset,
    feature: usize,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if feature >= eval_set.p() {
        return Err(Error::UnknownFeature {
            index: feature,
            p: eval_set.p(),
        });
    }
    if repetitions == 0 {
        return Err(Error::NoRepetitions);
    }
    let base = eval_error(forest, eval_set)?;
    let perms: Vec<Vec<usize>> = (0..repetitions)
        .map(|r| stream::permutation(seed, feature, r, eval_set.n()))
        .collect();
    pfi_with_permutations(forest, eval_set, feature, &perms, base)
}

/// PFI against explicit permutations; exposed so tests can force the identity.
pub fn pfi_with_permutations(
    forest: &Forest,
    eval_set: &Dataset,
    feature: usize,
    permutations: &[Vec<usize>],
    base_error: f64,
) -> Result<Vec<f64>> {
    permutations
        .par_iter()
        .map(|perm| {
            let permuted = eval_set.with_permuted_column(feature, perm);
            Ok(eval_error(forest, &permuted)? - base_error)
        })
        .collect()
}

/// PFI for every feature of the evaluation set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub feature_names: Vec<String>,
    /// `pfi[feature][repetition]`: error increase per permutation.
    pub pfi: Vec<Vec<f64>>,
    pub base_error: f64,
    pub metric: ErrorMetric,
    /// Optional permute-and-relearn score per feature.
    pub relearn: Option<Vec<f64>>,
}

impl ImportanceReport {
    pub fn pfi_mean(&self, feature: usize) -> f64 {
        let v = &self.pfi[feature];
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn pfi_sd(&self, feature: usize) -> f64 {
        let v = &self.pfi[feature];
        if v.len() < 2 {
            return 0.0;
        }
        let mean = self.pfi_mean(feature);
        let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
        (ss / (v.len() - 1) as f64).sqrt()
    }

    /// Flat CSV: `feature,repetition,pfi`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("feature,repetition,pfi\n");
        for (j, reps) in self.pfi.iter().enumerate() {
            for (r, v) in reps.iter().enumerate() {
                let _ = writeln!(out, "{},{},{}", self.feature_names[j], r, v);
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

    /// Per-feature mean/sd summary as JSON.
    pub fn summary_json(&self) -> serde_json::Value {
        let features: Vec<serde_json::Value> = (0..self.feature_names.len())
            .map(|j| {
                let mut entry = serde_json::json!({
                    "feature": self.feature_names[j],
                    "pfi_mean": self.pfi_mean(j),
                    "pfi_sd": self.pfi_sd(j),
                });
                if let Some(relearn) = &self.relearn {
                    entry["relearn"] = serde_json::json!(relearn[j]);
                }
                entry
            })
            .collect();
        serde_json::json!({
            "base_error": self.base_error,
            "metric": self.metric,
            "features": features,
        })
    }
}

/// PFI report over all features, sharing the ALCD permutation streams.
pub fn pfi_report(
    forest: &Forest,
    eval_set: &Dataset,
    repetitions: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    let base = eval_error(forest, eval_set)?;
    let pfi_scores: Result<Vec<Vec<f64>>> = (0..eval_set.p())
        .map(|j| {
            let perms: Vec<Vec<usize>> = (0..repetitions)
                .map(|r| stream::permutation(seed, j, r, eval_set.n()))
                .collect();
            pfi_with_permutations(forest, eval_set, j, &perms, base)
        })
        .collect();
    Ok(ImportanceReport {
        feature_names: eval_set.feature_names().to_vec(),
        pfi: pfi_scores?,
        base_error: base,
        metric: ErrorMetric::for_task(eval_set.task()),
        relearn: None,
    })
}

/// Permute-and-relearn importance of one feature: permute column `feature` in
/// the training set, refit with the same hyperparameters and seed, and return
/// the refit's test error minus the original fit's test error.
pub fn relearn_importance(
    train: &Dataset,
    test: &Dataset,
    feature: usize,
    params: &ForestParams,
    seed: u64,
) -> Result<f64> {
    if feature >= train.p() {
        return Err(Error::UnknownFeature {
            index: feature,
            p: train.p(),
        });
    }
    let original = Forest::fit(train, params, seed)?;
    let base_error = eval_error(&original, test)?;

    let relearn_seed = stream::derive(seed, &[stream::TAG_RELEARN]);
    let perm = stream::permutation(relearn_seed, feature, 0, train.n());
    let permuted_train = train.with_permuted_column(feature, &perm);
    let refit = Forest::fit(&permuted_train, params, seed)?;
    Ok(eval_error(&refit, test)? - base_error)
}
