//! Sparse principal component analysis by alternating minimization.
//!
//! Minimizes `||X - X W P'||_F^2 + lambda1 * sum_r ||w_r||_1 + lambda2 *
//! sum_r ||w_r||_2^2` subject to orthonormal columns of the loading matrix
//! `P`. With `P` fixed, each weight column solves an elastic-net regression
//! of `X p_r` on `X`, handled by cyclic coordinate descent; with `W` fixed,
//! `P` is the reduced-rank Procrustes solution from the thin SVD of `X'X W`.
//! The orthogonality constraint on `W` itself is dropped, which is what lets
//! the l1 penalty produce sparse weights.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Target};
use crate::error::{Error, Result};

const ZERO_TOL: f64 = 1e-12;
const CENTER_TOL: f64 = 1e-8;
const CD_TOL: f64 = 1e-9;
const CD_MAX_SWEEPS: usize = 200;

/// Solver configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpcaParams {
    pub components: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Relative objective change below which the alternation stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl SpcaParams {
    pub fn new(components: usize) -> Self {
        Self {
            components,
            lambda1: 0.0,
            lambda2: 0.0,
            tol: 1e-6,
            max_iter: 500,
        }
    }

    pub fn with_penalties(mut self, lambda1: f64, lambda2: f64) -> Self {
        self.lambda1 = lambda1;
        self.lambda2 = lambda2;
        self
    }
}

/// A fitted sparse PCA model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpcaModel {
    /// Weight matrix W (p x R): maps centered data to component scores.
    pub weights: DMatrix<f64>,
    /// Loading matrix P (p x R), orthonormal columns: maps scores back to
    /// feature space.
    pub loadings: DMatrix<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Column means of the training data; reused by [`SpcaModel::transform`].
    pub means: Vec<f64>,
    /// Objective value after initialization and after every iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl SpcaModel {
    pub fn components(&self) -> usize {
        self.weights.ncols()
    }

    pub fn n_features(&self) -> usize {
        self.weights.nrows()
    }

    /// Number of weight entries with magnitude above the zero tolerance.
    pub fn nonzero_count(&self) -> usize {
        self.weights.iter().filter(|v| v.abs() > ZERO_TOL).count()
    }

    /// True when every feature row of W has at most one nonzero entry, i.e.
    /// no feature is represented in more than one component.
    pub fn is_single_membership(&self) -> bool {
        self.multi_membership_rows() == 0
    }

    /// Count of feature rows represented in two or more components.
    pub fn multi_membership_rows(&self) -> usize {
        (0..self.weights.nrows())
            .filter(|&i| {
                (0..self.weights.ncols())
                    .filter(|&r| self.weights[(i, r)].abs() > ZERO_TOL)
                    .count()
                    > 1
            })
            .count()
    }

    /// Component scores `(X_new - means) W` for rows with the training
    /// feature count.
    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let p = self.n_features();
        let r = self.components();
        let mut out = Vec::with_capacity(rows.len());
        for row in rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    got: row.len(),
                    expected: p,
                });
            }
            let mut scores = vec![0.0; r];
            for (j, (&v, &mean)) in row.iter().zip(&self.means).enumerate() {
                let centered = v - mean;
                if centered != 0.0 {
                    for (k, s) in scores.iter_mut().enumerate() {
                        *s += centered * self.weights[(j, k)];
                    }
                }
            }
            out.push(scores);
        }
        Ok(out)
    }

    /// Transforms a dataset into component-score space, keeping its target.
    /// Components are named `PC1..PCR`.
    pub fn transform_dataset(&self, ds: &Dataset) -> Result<Dataset> {
        let scores = self.transform(ds.features())?;
        let names = (1..=self.components()).map(|k| format!("PC{k}")).collect();
        match ds.target() {
            Target::Regression(y) => {
                Dataset::new(scores, Target::Regression(y.clone()), names)
            }
            Target::Classification { labels, classes } => Dataset::new(
                scores,
                Target::Classification {
                    labels: labels.clone(),
                    classes: classes.clone(),
                },
                names,
            ),
        }
    }

    /// Squared Frobenius reconstruction error of `rows` under this model,
    /// after centering with the training means.
    pub fn reconstruction_error(&self, rows: &[Vec<f64>]) -> Result<f64> {
        let xc = center_with(rows, &self.means)?;
        Ok(reconstruction_sse(&xc, &self.weights, &self.loadings))
    }

    /// JSON document with dense W and P, penalties, and the trace.
    pub fn to_json_value(&self) -> serde_json::Value {
        let dense = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                .collect()
        };
        serde_json::json!({
            "components": self.components(),
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "weights": dense(&self.weights),
            "loadings": dense(&self.loadings),
            "means": self.means,
            "objective_trace": self.objective_trace,
            "converged": self.converged,
            "iterations": self.iterations,
        })
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json_value())?;
        std::fs::write(path.as_ref(), text).map_err(|source| Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }
}

/// Fits sparse PCA; `x` is centered internally against its column means and
/// the means are stored on the model for later transforms.
pub fn fit(x: &[Vec<f64>], params: &SpcaParams) -> Result<SpcaModel> {
    let (xc, means) = center(x)?;
    fit_centered_matrix(xc, means, params, None)
}

/// Fits sparse PCA on data that is already column-centered; errors when any
/// column mean exceeds 1e-8 in magnitude.
pub fn fit_centered(x: &[Vec<f64>], params: &SpcaParams) -> Result<SpcaModel> {
    let xc = to_matrix(x)?;
    for j in 0..xc.ncols() {
        let mean = xc.column(j).sum() / xc.nrows() as f64;
        if mean.abs() > CENTER_TOL {
            return Err(Error::NotCentered { column: j, mean });
        }
    }
    let p = xc.ncols();
    fit_centered_matrix(xc, vec![0.0; p], params, None)
}

/// Sparsity criterion for the lambda1 path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparsityTarget {
    /// Every feature row of W has at most one nonzero entry.
    SingleMembership,
    /// Total nonzero weight count at most the given bound.
    TotalNonzeros(usize),
}

impl SparsityTarget {
    fn met(&self, model: &SpcaModel) -> bool {
        match self {
            SparsityTarget::SingleMembership => model.is_single_membership(),
            SparsityTarget::TotalNonzeros(bound) => model.nonzero_count() <= *bound,
        }
    }

    /// Violation size used to pick the best model when no grid value works.
    fn violation(&self, model: &SpcaModel) -> usize {
        match self {
            SparsityTarget::SingleMembership => model.multi_membership_rows(),
            SparsityTarget::TotalNonzeros(bound) => model.nonzero_count().saturating_sub(*bound),
        }
    }
}

/// Walks an increasing lambda1 grid (warm-starting each fit from the previous
/// solution) and returns the smallest value whose fitted model meets the
/// sparsity target, together with that model.
pub fn sparsity_path(
    x: &[Vec<f64>],
    components: usize,
    lambda2: f64,
    lambda1_grid: &[f64],
    target: SparsityTarget,
) -> Result<(f64, SpcaModel)> {
    if lambda1_grid.is_empty() || lambda1_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::BadLambdaGrid);
    }
    let (xc, means) = center(x)?;
    let mut warm: Option<(DMatrix<f64>, DMatrix<f64>)> = None;
    let mut best: Option<(f64, SpcaModel, usize)> = None;
    for &lambda1 in lambda1_grid {
        let params = SpcaParams {
            components,
            lambda1,
            lambda2,
            ..SpcaParams::new(components)
        };
        let model = fit_centered_matrix(xc.clone(), means.clone(), &params, warm.as_ref())?;
        warm = Some((model.weights.clone(), model.loadings.clone()));
        if target.met(&model) {
            return Ok((lambda1, model));
        }
        let violation = target.violation(&model);
        let replace = best.as_ref().map(|(_, _, v)| violation < *v).unwrap_or(true);
        if replace {
            best = Some((lambda1, model, violation));
        }
    }
    let (best_lambda1, best_model, _) = best.expect("grid is non-empty");
    Err(Error::SparsityTargetUnreached {
        best_lambda1,
        best: Box::new(best_model),
    })
}

/// A lambda1 grid reaching from near zero to a value that provably shrinks
/// every weight to zero, geometric with `count` points.
pub fn default_lambda1_grid(x: &[Vec<f64>], count: usize) -> Result<Vec<f64>> {
    let (xc, _) = center(x)?;
    let gram = xc.transpose() * &xc;
    // |gram_j . p| <= ||gram_j|| for any unit-norm loading column, so twice
    // the largest gram column norm zeroes every coordinate update.
    let lambda_max = (0..gram.ncols())
        .map(|j| gram.column(j).norm())
        .fold(0.0f64, f64::max)
        * 2.0;
    let lambda_max = lambda_max.max(1e-12);
    let lo = lambda_max * 1e-4;
    let count = count.max(2);
    let ratio = (lambda_max / lo).powf(1.0 / (count - 1) as f64);
    let mut grid = Vec::with_capacity(count);
    let mut v = lo;
    for _ in 0..count {
        grid.push(v);
        v *= ratio;
    }
    Ok(grid)
}

fn to_matrix(x: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if x.is_empty() {
        return Err(Error::TooFewRows(0));
    }
    let p = x[0].len();
    if p == 0 {
        return Err(Error::NoFeatures);
    }
    for (i, row) in x.iter().enumerate() {
        if row.len() != p {
            return Err(Error::RaggedRows {
                row: i,
                got: row.len(),
                expected: p,
            });
        }
    }
    Ok(DMatrix::from_fn(x.len(), p, |i, j| x[i][j]))
}

fn center(x: &[Vec<f64>]) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let mut xc = to_matrix(x)?;
    let n = xc.nrows() as f64;
    let mut means = Vec::with_capacity(xc.ncols());
    for j in 0..xc.ncols() {
        let mean = xc.column(j).sum() / n;
        means.push(mean);
        for i in 0..xc.nrows() {
            xc[(i, j)] -= mean;
        }
    }
    Ok((xc, means))
}

fn center_with(rows: &[Vec<f64>], means: &[f64]) -> Result<DMatrix<f64>> {
    let m = to_matrix(rows)?;
    if m.ncols() != means.len() {
        return Err(Error::DimensionMismatch {
            got: m.ncols(),
            expected: means.len(),
        });
    }
    let mut xc = m;
    for j in 0..xc.ncols() {
        for i in 0..xc.nrows() {
            xc[(i, j)] -= means[j];
        }
    }
    Ok(xc)
}

fn reconstruction_sse(xc: &DMatrix<f64>, w: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    let scores = xc * w;
    let recon = &scores * p.transpose();
    let mut sse = 0.0;
    for (a, b) in xc.iter().zip(recon.iter()) {
        let d = a - b;
        sse += d * d;
    }
    sse
}

fn objective(xc: &DMatrix<f64>, w: &DMatrix<f64>, p: &DMatrix<f64>, l1: f64, l2: f64) -> f64 {
    let penalty1: f64 = w.iter().map(|v| v.abs()).sum();
    let penalty2: f64 = w.iter().map(|v| v * v).sum();
    reconstruction_sse(xc, w, p) + l1 * penalty1 + l2 * penalty2
}

#[inline]
fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Cyclic coordinate descent for
/// `min_w ||y - X w||^2 + lambda1 ||w||_1 + lambda2 ||w||^2`.
fn coordinate_descent(
    xc: &DMatrix<f64>,
    col_sq: &[f64],
    y: &DVector<f64>,
    w: &mut DVector<f64>,
    lambda1: f64,
    lambda2: f64,
) {
    let p = xc.ncols();
    let mut residual = y - xc * &*w;
    for _ in 0..CD_MAX_SWEEPS {
        let mut max_delta = 0.0f64;
        for j in 0..p {
            let denom = col_sq[j] + lambda2;
            if denom <= 0.0 {
                continue;
            }
            let xj = xc.column(j);
            let old = w[j];
            let z = xj.dot(&residual) + col_sq[j] * old;
            let new = soft_threshold(z, lambda1 / 2.0) / denom;
            if new != old {
                residual.axpy(old - new, &xj, 1.0);
                w[j] = new;
                max_delta = max_delta.max((new - old).abs());
            }
        }
        let scale = 1.0 + w.amax();
        if max_delta < CD_TOL * scale {
            break;
        }
    }
}

fn fit_centered_matrix(
    xc: DMatrix<f64>,
    means: Vec<f64>,
    params: &SpcaParams,
    warm: Option<&(DMatrix<f64>, DMatrix<f64>)>,
) -> Result<SpcaModel> {
    let n = xc.nrows();
    let p = xc.ncols();
    let r = params.components;
    if r == 0 || r > n.min(p) {
        return Err(Error::ComponentsOutOfRange {
            components: r,
            n,
            p,
        });
    }

    let (mut w, mut loadings) = match warm {
        Some((w0, p0)) => (w0.clone(), p0.clone()),
        None => {
            // Warm start from the top-R right singular vectors: with zero
            // penalties the initializer is already the PCA solution.
            let svd = xc.clone().svd(true, true);
            let v_t = svd.v_t.expect("SVD with v_t requested");
            let v_r = v_t.rows(0, r).transpose();
            (v_r.clone(), v_r)
        }
    };

    let gram = xc.transpose() * &xc;
    let col_sq: Vec<f64> = (0..p).map(|j| gram[(j, j)]).collect();

    let mut trace = vec![objective(&xc, &w, &loadings, params.lambda1, params.lambda2)];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..params.max_iter {
        iterations += 1;

        // P-step: reduced-rank Procrustes, P = U V' from the thin SVD of X'X W.
        let m = &gram * &w;
        let svd = m.svd(true, true);
        let u = svd.u.expect("SVD with u requested");
        let v_t = svd.v_t.expect("SVD with v_t requested");
        loadings = &u * &v_t;

        // W-step: one elastic-net regression of X p_r on X per column.
        for k in 0..r {
            let y = &xc * loadings.column(k);
            let mut wk: DVector<f64> = w.column(k).into();
            coordinate_descent(&xc, &col_sq, &y, &mut wk, params.lambda1, params.lambda2);
            w.set_column(k, &wk);
        }

        let obj = objective(&xc, &w, &loadings, params.lambda1, params.lambda2);
        let prev = *trace.last().unwrap();
        // both steps solve their subproblem exactly, so the objective can
        // only move down (up to rounding)
        debug_assert!(obj <= prev + 1e-9 * prev.abs().max(1.0));
        trace.push(obj);
        let scale = prev.abs().max(1e-300);
        if ((prev - obj) / scale).abs() < params.tol {
            converged = true;
            break;
        }
    }

    // Sign convention: the largest-magnitude entry of each weight column is
    // positive. W and P columns flip together, preserving W P'.
    for k in 0..r {
        let mut best = 0;
        for i in 0..p {
            if w[(i, k)].abs() > w[(best, k)].abs() {
                best = i;
            }
        }
        if w[(best, k)] < 0.0 {
            for i in 0..p {
                w[(i, k)] = -w[(i, k)];
                loadings[(i, k)] = -loadings[(i, k)];
            }
        }
    }

    Ok(SpcaModel {
        weights: w,
        loadings,
        lambda1: params.lambda1,
        lambda2: params.lambda2,
        means,
        objective_trace: trace,
        converged,
        iterations,
    })
}
