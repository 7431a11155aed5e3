//! Dataset representation, CSV ingestion, standardization, baseline
//! injection, and train/test splitting.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream;

/// Name of the injected independent reference feature.
pub const BASELINE_NAME: &str = "BASELINE";

/// Prediction task kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

/// Target column: real-valued for regression, class indices plus class names
/// for classification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Regression(Vec<f64>),
    Classification {
        /// Per-row index into `classes`.
        labels: Vec<usize>,
        /// Distinct class names, sorted.
        classes: Vec<String>,
    },
}

impl Target {
    pub fn len(&self) -> usize {
        match self {
            Target::Regression(y) => y.len(),
            Target::Classification { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> Task {
        match self {
            Target::Regression(_) => Task::Regression,
            Target::Classification { .. } => Task::Classification,
        }
    }

    fn subset(&self, indices: &[usize]) -> Target {
        match self {
            Target::Regression(y) => Target::Regression(indices.iter().map(|&i| y[i]).collect()),
            Target::Classification { labels, classes } => Target::Classification {
                labels: indices.iter().map(|&i| labels[i]).collect(),
                classes: classes.clone(),
            },
        }
    }
}

/// A feature matrix with a target column.
///
/// Rows are observations, `features[i][j]` is feature `j` of row `i`. All
/// entries are finite, feature names are unique, and classification targets
/// carry at least two classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    target: Target,
    feature_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, validating every invariant.
    pub fn new(features: Vec<Vec<f64>>, target: Target, feature_names: Vec<String>) -> Result<Self> {
        if features.len() < 2 {
            return Err(Error::TooFewRows(features.len()));
        }
        Self::assemble(features, target, feature_names)
    }

    /// As [`Dataset::new`] but allows a single row; used for split halves,
    /// where a one-row test set is legal.
    fn assemble(
        features: Vec<Vec<f64>>,
        target: Target,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = features.len();
        if n == 0 {
            return Err(Error::TooFewRows(0));
        }
        let p = feature_names.len();
        if p == 0 {
            return Err(Error::NoFeatures);
        }
        for (i, row) in features.iter().enumerate() {
            if row.len() != p {
                return Err(Error::RaggedRows {
                    row: i,
                    got: row.len(),
                    expected: p,
                });
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue {
                        column: feature_names[j].clone(),
                        row: i,
                    });
                }
            }
        }
        for (j, name) in feature_names.iter().enumerate() {
            if feature_names[..j].contains(name) {
                return Err(Error::DuplicateFeatureName(name.clone()));
            }
        }
        if target.len() != n {
            return Err(Error::TargetLengthMismatch {
                got: target.len(),
                expected: n,
            });
        }
        if let Target::Classification { labels, classes } = &target {
            if classes.len() < 2 {
                return Err(Error::SingleClass(classes.len()));
            }
            debug_assert!(labels.iter().all(|&l| l < classes.len()));
        }
        if let Target::Regression(y) = &target {
            if let Some(i) = y.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue {
                    column: "<target>".into(),
                    row: i,
                });
            }
        }
        Ok(Self {
            features,
            target,
            feature_names,
        })
    }

    pub fn n(&self) -> usize {
        self.features.len()
    }

    pub fn p(&self) -> usize {
        self.feature_names.len()
    }

    pub fn task(&self) -> Task {
        self.target.task()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn target(&self) -> &Target {
        &self.target
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Index of a feature by name.
    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    /// Index of the baseline column, if present.
    pub fn baseline_index(&self) -> Option<usize> {
        self.feature_index(BASELINE_NAME)
    }

    /// Copy of feature column `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.features.iter().map(|row| row[j]).collect()
    }

    /// Regression targets; panics on classification data.
    pub fn regression_targets(&self) -> &[f64] {
        match &self.target {
            Target::Regression(y) => y,
            Target::Classification { .. } => panic!("classification dataset"),
        }
    }

    /// Class labels and class count; panics on regression data.
    pub fn classification_targets(&self) -> (&[usize], usize) {
        match &self.target {
            Target::Classification { labels, classes } => (labels, classes.len()),
            Target::Regression(_) => panic!("regression dataset"),
        }
    }

    /// New dataset holding the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            target: self.target.subset(indices),
            feature_names: self.feature_names.clone(),
        }
    }

    /// New dataset keeping only the given feature columns, in the given order.
    pub fn select_features(&self, columns: &[usize]) -> Result<Dataset> {
        if columns.is_empty() {
            return Err(Error::NoFeatures);
        }
        if let Some(&bad) = columns.iter().find(|&&j| j >= self.p()) {
            return Err(Error::UnknownFeature {
                index: bad,
                p: self.p(),
            });
        }
        let features = self
            .features
            .iter()
            .map(|row| columns.iter().map(|&j| row[j]).collect())
            .collect();
        let feature_names = columns
            .iter()
            .map(|&j| self.feature_names[j].clone())
            .collect();
        Dataset::assemble(features, self.target.clone(), feature_names)
    }

    /// New dataset with column `j` rearranged by `perm`: row `i` receives the
    /// column-`j` value of row `perm[i]`. All other columns are untouched.
    pub fn with_permuted_column(&self, j: usize, perm: &[usize]) -> Dataset {
        debug_assert_eq!(perm.len(), self.n());
        let mut features = self.features.clone();
        for (i, &src) in perm.iter().enumerate() {
            features[i][j] = self.features[src][j];
        }
        Dataset {
            features,
            target: self.target.clone(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Appends an independent Uniform(0,1) column named [`BASELINE_NAME`].
    ///
    /// The draw is deterministic in `seed`; original columns are bit-identical.
    pub fn add_baseline(&self, seed: u64) -> Result<Dataset> {
        if self.baseline_index().is_some() {
            return Err(Error::BaselineCollision(BASELINE_NAME.into()));
        }
        let mut rng = stream::rng(seed, &[stream::TAG_BASELINE]);
        let mut features = self.features.clone();
        for row in features.iter_mut() {
            row.push(rng.gen::<f64>());
        }
        let mut feature_names = self.feature_names.clone();
        feature_names.push(BASELINE_NAME.into());
        Ok(Dataset {
            features,
            target: self.target.clone(),
            feature_names,
        })
    }

    /// Drops the last feature column; inverse of [`Dataset::add_baseline`].
    pub fn drop_last_column(&self) -> Result<Dataset> {
        if self.p() < 2 {
            return Err(Error::NoFeatures);
        }
        let features = self
            .features
            .iter()
            .map(|row| row[..row.len() - 1].to_vec())
            .collect();
        Ok(Dataset {
            features,
            target: self.target.clone(),
            feature_names: self.feature_names[..self.p() - 1].to_vec(),
        })
    }

    /// Centers and scales every column to sample mean 0 and sample standard
    /// deviation 1, returning the transformed data and the record needed to
    /// reapply or invert the transform.
    pub fn standardize(&self) -> Result<(Dataset, Standardization)> {
        let record = Standardization::fit(self)?;
        let out = record.apply(self)?;
        Ok((out, record))
    }

    /// Deterministic train/test split; the train half receives
    /// `floor(train_fraction * n)` rows.
    pub fn split(&self, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
        if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
            return Err(Error::InvalidFraction(spec.train_fraction));
        }
        let n = self.n();
        let n_train = (spec.train_fraction * n as f64).floor() as usize;
        let n_test = n - n_train;
        if n_train < 2 || n_test < 1 {
            return Err(Error::SplitTooSmall {
                n,
                fraction: spec.train_fraction,
                train: n_train,
                test: n_test,
            });
        }
        let mut indices: Vec<usize> = (0..n).collect();
        {
            use rand::seq::SliceRandom;
            let mut rng = stream::rng(spec.seed, &[stream::TAG_SPLIT]);
            indices.shuffle(&mut rng);
        }
        let mut train_idx = indices[..n_train].to_vec();
        let mut test_idx = indices[n_train..].to_vec();
        train_idx.sort_unstable();
        test_idx.sort_unstable();
        Ok((self.subset(&train_idx), self.subset(&test_idx)))
    }

    /// Loads a dataset from a headered CSV file. Every non-target column must
    /// be numeric; the target column is parsed per `task`.
    pub fn load_csv(path: impl AsRef<Path>, target_column: &str, task: Task) -> Result<Dataset> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: display.clone(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
        let headers: Vec<String> = reader
            .headers()
            .map_err(|source| Error::Csv {
                path: display.clone(),
                source,
            })?
            .iter()
            .map(str::to_string)
            .collect();
        if headers.iter().all(|h| h.is_empty()) {
            return Err(Error::EmptyFile(display));
        }
        let target_pos = headers
            .iter()
            .position(|h| h == target_column)
            .ok_or_else(|| Error::MissingTargetColumn(target_column.to_string()))?;
        let feature_names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != target_pos)
            .map(|(_, h)| h.clone())
            .collect();

        let mut features: Vec<Vec<f64>> = Vec::new();
        let mut raw_targets: Vec<String> = Vec::new();
        for (row_idx, record) in reader.records().enumerate() {
            let record = record.map_err(|source| Error::Csv {
                path: display.clone(),
                source,
            })?;
            let mut row = Vec::with_capacity(headers.len() - 1);
            for (col_idx, cell) in record.iter().enumerate() {
                if col_idx == target_pos {
                    raw_targets.push(cell.trim().to_string());
                } else {
                    let value: f64 = cell.trim().parse().map_err(|_| Error::NonNumericCell {
                        column: headers[col_idx].clone(),
                        row: row_idx,
                        value: cell.to_string(),
                    })?;
                    row.push(value);
                }
            }
            features.push(row);
        }
        if features.is_empty() {
            return Err(Error::EmptyFile(display));
        }

        let target = match task {
            Task::Regression => {
                let mut y = Vec::with_capacity(raw_targets.len());
                for (i, raw) in raw_targets.iter().enumerate() {
                    let v: f64 = raw.parse().map_err(|_| Error::NonNumericCell {
                        column: target_column.to_string(),
                        row: i,
                        value: raw.clone(),
                    })?;
                    y.push(v);
                }
                Target::Regression(y)
            }
            Task::Classification => {
                let mut classes: Vec<String> = raw_targets.clone();
                classes.sort();
                classes.dedup();
                if classes.len() < 2 {
                    return Err(Error::SingleClass(classes.len()));
                }
                let labels = raw_targets
                    .iter()
                    .map(|raw| classes.iter().position(|c| c == raw).unwrap())
                    .collect();
                Target::Classification { labels, classes }
            }
        };
        Dataset::new(features, target, feature_names)
    }

    /// Writes the dataset as a headered CSV with the target as the last
    /// column, named `target_name`.
    pub fn write_csv(&self, path: impl AsRef<Path>, target_name: &str) -> Result<()> {
        let text = self.to_csv_string(target_name);
        std::fs::write(path.as_ref(), text).map_err(|source| Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }

    /// CSV text with the target as the last column.
    pub fn to_csv_string(&self, target_name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{},{}", self.feature_names.join(","), target_name);
        for (i, row) in self.features.iter().enumerate() {
            for v in row {
                let _ = write!(out, "{},", v);
            }
            match &self.target {
                Target::Regression(y) => {
                    let _ = writeln!(out, "{}", y[i]);
                }
                Target::Classification { labels, classes } => {
                    let _ = writeln!(out, "{}", classes[labels[i]]);
                }
            }
        }
        out
    }
}

/// Per-feature location/scale record from [`Dataset::standardize`].
///
/// Fitting on a training split and applying to both splits keeps the test
/// geometry free of leakage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    /// Sample standard deviations (n-1 denominator).
    pub sds: Vec<f64>,
}

impl Standardization {
    /// Fits means and sample standard deviations on `ds`.
    pub fn fit(ds: &Dataset) -> Result<Self> {
        let n = ds.n() as f64;
        let p = ds.p();
        let mut means = vec![0.0; p];
        let mut sds = vec![0.0; p];
        for j in 0..p {
            let mut sum = 0.0;
            for row in ds.features() {
                sum += row[j];
            }
            let mean = sum / n;
            let mut ss = 0.0;
            for row in ds.features() {
                let d = row[j] - mean;
                ss += d * d;
            }
            let sd = if ds.n() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
            if sd <= 1e-12 {
                return Err(Error::ConstantColumn(ds.feature_names()[j].clone()));
            }
            means[j] = mean;
            sds[j] = sd;
        }
        Ok(Self { means, sds })
    }

    /// Applies the transform `(x - mean) / sd` columnwise.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.p() != self.means.len() {
            return Err(Error::DimensionMismatch {
                got: ds.p(),
                expected: self.means.len(),
            });
        }
        let features = ds
            .features()
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(j, v)| (v - self.means[j]) / self.sds[j])
                    .collect()
            })
            .collect();
        Dataset::assemble(features, ds.target.clone(), ds.feature_names.clone())
    }

    /// Inverts the transform.
    pub fn invert(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.p() != self.means.len() {
            return Err(Error::DimensionMismatch {
                got: ds.p(),
                expected: self.means.len(),
            });
        }
        let features = ds
            .features()
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(j, v)| v * self.sds[j] + self.means[j])
                    .collect()
            })
            .collect();
        Dataset::assemble(features, ds.target.clone(), ds.feature_names.clone())
    }
}

/// Train/test split request.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}
