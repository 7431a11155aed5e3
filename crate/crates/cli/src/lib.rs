//! Command-line orchestration for extrapolation audits: dataset simulation,
//! forest training, leaf-community distance tables, paired permutation tests,
//! permutation importances, the dimensionality sweep, and the sparse-PCA
//! front end, all wired into reproducible, machine-readable experiment runs.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;

pub use error::{CliError, CliResult};
