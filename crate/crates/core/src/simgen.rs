//! Simulated data-generating processes: a linear model over two correlated
//! normals plus independent uniforms, a dependent-but-uncorrelated sin/cos
//! pair, block-correlated multivariate normals (equal or varied correlation),
//! and the high-dimensional sweep configuration built from blocks of ten.
//!
//! Every generator produces `y = eps + sum_j x_j` with `eps ~ N(0, noise_sd^2)`
//! and feature names `V1..Vp`, deterministic in the seed.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Target};
use crate::error::{Error, Result};
use crate::stream;

/// Default noise standard deviation of the response.
pub const DEFAULT_NOISE_SD: f64 = 0.1;

/// Which process generates the data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Two correlated normals (correlation rho) plus six independent uniforms.
    TwoCorrelated,
    /// sin/cos of a shared angle (dependent, uncorrelated) plus six uniforms.
    Circle,
    /// Block-correlated multivariate normal, one correlation for all blocks.
    EqualBlocks,
    /// Block-correlated multivariate normal, one correlation per block.
    VariedBlocks,
    /// Dimensionality-sweep cell: equal-correlation blocks of ten.
    Cod,
}

/// A fully-specified simulated dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub p: usize,
    /// Block correlations; a single value is recycled across blocks.
    pub rhos: Vec<f64>,
    pub block_size: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn two_correlated(n: usize, rho: f64, seed: u64) -> Self {
        Self {
            kind: GeneratorKind::TwoCorrelated,
            n,
            p: 8,
            rhos: vec![rho],
            block_size: 2,
            noise_sd: DEFAULT_NOISE_SD,
            seed,
        }
    }

    pub fn circle(n: usize, seed: u64) -> Self {
        Self {
            kind: GeneratorKind::Circle,
            n,
            p: 8,
            rhos: vec![],
            block_size: 2,
            noise_sd: DEFAULT_NOISE_SD,
            seed,
        }
    }

    pub fn equal_blocks(n: usize, p: usize, block_size: usize, rho: f64, seed: u64) -> Self {
        Self {
            kind: GeneratorKind::EqualBlocks,
            n,
            p,
            rhos: vec![rho],
            block_size,
            noise_sd: DEFAULT_NOISE_SD,
            seed,
        }
    }

    pub fn varied_blocks(n: usize, p: usize, block_size: usize, rhos: Vec<f64>, seed: u64) -> Self {
        Self {
            kind: GeneratorKind::VariedBlocks,
            n,
            p,
            rhos,
            block_size,
            noise_sd: DEFAULT_NOISE_SD,
            seed,
        }
    }

    pub fn cod(n: usize, p: usize, rho: f64, seed: u64) -> Self {
        Self {
            kind: GeneratorKind::Cod,
            n,
            p,
            rhos: vec![rho],
            block_size: 10,
            noise_sd: DEFAULT_NOISE_SD,
            seed,
        }
    }

    /// Materializes the dataset.
    pub fn generate(&self) -> Result<Dataset> {
        match self.kind {
            GeneratorKind::TwoCorrelated => {
                two_correlated_with_noise(self.n, self.rhos[0], self.noise_sd, self.seed)
            }
            GeneratorKind::Circle => circle_with_noise(self.n, self.noise_sd, self.seed),
            GeneratorKind::EqualBlocks | GeneratorKind::VariedBlocks | GeneratorKind::Cod => {
                blocks_with_noise(
                    self.n,
                    self.p,
                    self.block_size,
                    &self.rhos,
                    self.noise_sd,
                    self.seed,
                )
            }
        }
    }

    /// Indices of features that belong to a correlated block of size >= 2.
    pub fn dependent_features(&self) -> Vec<usize> {
        match self.kind {
            GeneratorKind::TwoCorrelated | GeneratorKind::Circle => vec![0, 1],
            GeneratorKind::EqualBlocks | GeneratorKind::VariedBlocks | GeneratorKind::Cod => {
                if self.block_size < 2 {
                    return Vec::new();
                }
                let in_blocks = (self.p / self.block_size) * self.block_size;
                (0..in_blocks).collect()
            }
        }
    }

    /// Indices of features independent of everything else.
    pub fn independent_features(&self) -> Vec<usize> {
        let dependent = self.dependent_features();
        (0..self.p).filter(|j| !dependent.contains(j)).collect()
    }
}

fn feature_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("V{j}")).collect()
}

fn linear_response(features: &[Vec<f64>], noise_sd: f64, rng: &mut impl Rng) -> Vec<f64> {
    features
        .iter()
        .map(|row| {
            let eps: f64 = rng.sample::<f64, _>(StandardNormal) * noise_sd;
            eps + row.iter().sum::<f64>()
        })
        .collect()
}

/// Two features from a bivariate normal with unit variances and covariance
/// `rho`; six more i.i.d. Uniform(0,1); response `y = eps + sum x`.
pub fn two_correlated(n: usize, rho: f64, seed: u64) -> Result<Dataset> {
    two_correlated_with_noise(n, rho, DEFAULT_NOISE_SD, seed)
}

fn two_correlated_with_noise(n: usize, rho: f64, noise_sd: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::TooFewRows(n));
    }
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::InvalidCorrelation(rho));
    }
    let mut rng = stream::rng(seed, &[stream::TAG_GENERATOR]);
    let scale = (1.0 - rho * rho).sqrt();
    let mut features = Vec::with_capacity(n);
    for _ in 0..n {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let mut row = Vec::with_capacity(8);
        row.push(z1);
        row.push(rho * z1 + scale * z2);
        for _ in 0..6 {
            row.push(rng.gen::<f64>());
        }
        features.push(row);
    }
    let y = linear_response(&features, noise_sd, &mut rng);
    Dataset::new(features, Target::Regression(y), feature_names(8))
}

/// First two features sit exactly on the unit circle: `x1 = sin(theta)`,
/// `x2 = cos(theta)` with a shared uniform angle, so they are dependent but
/// uncorrelated. The rest matches [`two_correlated`].
pub fn circle(n: usize, seed: u64) -> Result<Dataset> {
    circle_with_noise(n, DEFAULT_NOISE_SD, seed)
}

fn circle_with_noise(n: usize, noise_sd: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::TooFewRows(n));
    }
    let mut rng = stream::rng(seed, &[stream::TAG_GENERATOR]);
    let mut features = Vec::with_capacity(n);
    for _ in 0..n {
        let theta = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
        let mut row = Vec::with_capacity(8);
        row.push(theta.sin());
        row.push(theta.cos());
        for _ in 0..6 {
            row.push(rng.gen::<f64>());
        }
        features.push(row);
    }
    let y = linear_response(&features, noise_sd, &mut rng);
    Dataset::new(features, Target::Regression(y), feature_names(8))
}

/// Multivariate normal with unit variances and a block-diagonal correlation
/// structure: within block `b` the off-diagonal correlation is `rhos[b]`
/// (a single value recycles), across blocks zero. Features beyond the last
/// full block are left independent.
pub fn blocks(n: usize, p: usize, block_size: usize, rhos: &[f64], seed: u64) -> Result<Dataset> {
    blocks_with_noise(n, p, block_size, rhos, DEFAULT_NOISE_SD, seed)
}

fn blocks_with_noise(
    n: usize,
    p: usize,
    block_size: usize,
    rhos: &[f64],
    noise_sd: f64,
    seed: u64,
) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::TooFewRows(n));
    }
    if p == 0 {
        return Err(Error::NoFeatures);
    }
    if block_size == 0 {
        return Err(Error::ZeroBlockSize);
    }
    let n_blocks = p / block_size;
    if rhos.len() != n_blocks && rhos.len() != 1 {
        return Err(Error::BlockSpecMismatch {
            expected: n_blocks,
            got: rhos.len(),
        });
    }
    for &rho in rhos {
        if !(rho > -1.0 && rho < 1.0) {
            return Err(Error::InvalidCorrelation(rho));
        }
    }

    // Cholesky factor per block of the equicorrelation matrix.
    let mut factors = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let rho = if rhos.len() == 1 { rhos[0] } else { rhos[b] };
        let cov = DMatrix::from_fn(block_size, block_size, |i, j| if i == j { 1.0 } else { rho });
        let factor = cov
            .cholesky()
            .ok_or(Error::NotPositiveDefinite { block_size, rho })?;
        factors.push(factor.unpack());
    }

    let mut rng = stream::rng(seed, &[stream::TAG_GENERATOR]);
    let mut features = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = Vec::with_capacity(p);
        for factor in &factors {
            let z: Vec<f64> = (0..block_size).map(|_| rng.sample(StandardNormal)).collect();
            for i in 0..block_size {
                let mut v = 0.0;
                for (k, zk) in z.iter().enumerate().take(i + 1) {
                    v += factor[(i, k)] * zk;
                }
                row.push(v);
            }
        }
        for _ in n_blocks * block_size..p {
            row.push(rng.sample(StandardNormal));
        }
        features.push(row);
    }
    let y = linear_response(&features, noise_sd, &mut rng);
    Dataset::new(features, Target::Regression(y), feature_names(p))
}

/// The dimensionality-sweep grid: every (n, p) cell as an equal-correlation
/// block spec with blocks of ten.
pub fn cod_suite(n_list: &[usize], p_list: &[usize], rho: f64, seed: u64) -> Vec<GeneratorSpec> {
    let mut specs = Vec::with_capacity(n_list.len() * p_list.len());
    for &n in n_list {
        for &p in p_list {
            specs.push(GeneratorSpec::cod(n, p, rho, seed));
        }
    }
    specs
}

/// Default observation counts of the sweep.
pub const COD_DEFAULT_N: [usize; 3] = [50, 100, 150];
/// Default feature counts of the sweep.
pub const COD_DEFAULT_P: [usize; 6] = [10, 50, 100, 150, 200, 250];
/// Default within-block correlation of the sweep.
pub const COD_DEFAULT_RHO: f64 = 0.75;
