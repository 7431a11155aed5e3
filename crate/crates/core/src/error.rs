//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by dataset handling, model fitting, and the statistical
/// routines in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in `{path}`: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("file `{0}` is empty")]
    EmptyFile(String),

    #[error("target column `{0}` not found in header")]
    MissingTargetColumn(String),

    #[error("non-numeric value `{value}` in column `{column}`, data row {row}")]
    NonNumericCell {
        column: String,
        row: usize,
        value: String,
    },

    #[error("dataset needs at least 2 rows, got {0}")]
    TooFewRows(usize),

    #[error("dataset needs at least 1 feature column")]
    NoFeatures,

    #[error("rows have inconsistent lengths: row {row} has {got} values, expected {expected}")]
    RaggedRows {
        row: usize,
        got: usize,
        expected: usize,
    },

    #[error("non-finite value in feature `{column}`, row {row}")]
    NonFiniteValue { column: String, row: usize },

    #[error("duplicate feature name `{0}`")]
    DuplicateFeatureName(String),

    #[error("classification target has {0} distinct class(es); need at least 2")]
    SingleClass(usize),

    #[error("target length {got} does not match row count {expected}")]
    TargetLengthMismatch { got: usize, expected: usize },

    #[error("dataset already contains a `{0}` column")]
    BaselineCollision(String),

    #[error("feature `{0}` is constant; cannot standardize")]
    ConstantColumn(String),

    #[error("train fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),

    #[error("split of {n} rows at fraction {fraction} leaves too few rows (train {train}, test {test})")]
    SplitTooSmall {
        n: usize,
        fraction: f64,
        train: usize,
        test: usize,
    },

    #[error("forest needs at least one tree")]
    NoTrees,

    #[error("mtry {mtry} out of range for {p} features")]
    MtryOutOfRange { mtry: usize, p: usize },

    #[error("min_leaf {min_leaf} exceeds sample count {n}")]
    MinLeafTooLarge { min_leaf: usize, n: usize },

    #[error("input has {got} coordinates, model expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },

    #[error("vectors have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("Minkowski exponent must be positive, got {0}")]
    NonPositiveExponent(f64),

    #[error("unknown feature index {index}; dataset has {p} features")]
    UnknownFeature { index: usize, p: usize },

    #[error("evaluation set is empty")]
    EmptyEvaluationSet,

    #[error("permutation repetitions must be at least 1")]
    NoRepetitions,

    #[error("paired sample is empty")]
    EmptySample,

    #[error("sample of size {0} too large for exact enumeration (max {1})")]
    SampleTooLarge(usize, usize),

    #[error("permutation count must be at least 1")]
    NoPermutationRounds,

    #[error("ALCD table has no baseline column")]
    MissingBaseline,

    #[error("correlation must lie in (-1, 1), got {0}")]
    InvalidCorrelation(f64),

    #[error("block covariance is not positive definite (block size {block_size}, rho {rho})")]
    NotPositiveDefinite { block_size: usize, rho: f64 },

    #[error("expected {expected} block correlations (or 1 to recycle), got {got}")]
    BlockSpecMismatch { expected: usize, got: usize },

    #[error("block size must be at least 1")]
    ZeroBlockSize,

    #[error("component count {components} out of range for a {n}x{p} matrix")]
    ComponentsOutOfRange {
        components: usize,
        n: usize,
        p: usize,
    },

    #[error("column {column} is not centered (mean {mean:.3e} exceeds 1e-8)")]
    NotCentered { column: usize, mean: f64 },

    #[error("lambda1 grid must be non-empty and strictly increasing")]
    BadLambdaGrid,

    #[error("no lambda1 in the grid reaches the sparsity target; best model attached")]
    SparsityTargetUnreached {
        best_lambda1: f64,
        best: Box<crate::spca::SpcaModel>,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
