//! Run configurations: where data comes from, how forests are trained, and
//! how the permutation protocol is sized. Every config serializes to JSON so
//! a whole experiment is reproducible from its manifest.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use trip_core::data::Task;
use trip_core::forest::ForestParams;
use trip_core::simgen::GeneratorSpec;
use trip_core::spca::SparsityTarget;

/// Where the audited dataset comes from.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DataSource {
    Csv {
        path: PathBuf,
        target: String,
        task: Task,
    },
    Generator(GeneratorSpec),
}

/// Full configuration of an audit: split, forest, metric, and protocol sizes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditConfig {
    pub source: DataSource,
    /// Train fraction in (0, 1]; 1.0 skips the split and evaluates ALCD on
    /// the training set.
    pub train_fraction: f64,
    pub forest: ForestParams,
    pub metric_exponent: f64,
    /// Permutation repetitions per feature (R).
    pub repetitions: usize,
    /// Sign-flip rounds per test (pi).
    pub rounds: usize,
    /// Independent data generations / re-splits.
    pub runs: usize,
    pub seed: u64,
    /// Also compute the permute-and-relearn oracle for every feature.
    pub relearn: bool,
    /// Keep only this fraction of columns, by training-split variance,
    /// before any other step.
    pub top_variance: Option<f64>,
    /// When set, reduce to sparse components before auditing.
    pub spca: Option<SpcaConfig>,
}

impl AuditConfig {
    pub fn new(source: DataSource, seed: u64) -> Self {
        Self {
            source,
            train_fraction: 0.75,
            forest: ForestParams::default(),
            metric_exponent: 2.0,
            repetitions: 25,
            rounds: 10_000,
            runs: 1,
            seed,
            relearn: false,
            top_variance: None,
            spca: None,
        }
    }
}

/// Sparse-PCA front-end configuration for `spca-audit`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpcaConfig {
    pub components: usize,
    pub lambda2: f64,
    /// Increasing lambda1 grid; `None` builds a geometric default reaching
    /// full shrinkage.
    pub lambda1_grid: Option<Vec<f64>>,
    pub sparsity_target: SparsityTarget,
}

impl SpcaConfig {
    pub fn new(components: usize) -> Self {
        Self {
            components,
            lambda2: 1.0,
            lambda1_grid: None,
            sparsity_target: SparsityTarget::SingleMembership,
        }
    }
}

/// Configuration of the dimensionality sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CodConfig {
    pub n_list: Vec<usize>,
    pub p_list: Vec<usize>,
    pub exponents: Vec<f64>,
    pub rho: f64,
    pub train_fraction: f64,
    pub forest: ForestParams,
    pub repetitions: usize,
    pub rounds: usize,
    pub runs: usize,
    pub seed: u64,
}

impl CodConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            n_list: trip_core::simgen::COD_DEFAULT_N.to_vec(),
            p_list: trip_core::simgen::COD_DEFAULT_P.to_vec(),
            exponents: vec![0.5, 1.0, 2.0, 3.0],
            rho: trip_core::simgen::COD_DEFAULT_RHO,
            train_fraction: 0.75,
            forest: ForestParams::default(),
            repetitions: 25,
            rounds: 10_000,
            runs: 1,
            seed,
        }
    }
}

/// Configuration of `simulate`: one generator spec, written out per run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub spec: GeneratorSpec,
    pub runs: usize,
    pub seed: u64,
}
