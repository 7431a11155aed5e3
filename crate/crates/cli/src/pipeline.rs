//! Experiment pipelines: audit, sparse-PCA audit, dimensionality sweep, and
//! dataset simulation.
//!
//! One audit run is: (generate or load) -> split -> optional top-variance
//! filter -> optional sparse-PCA reduction -> inject baseline -> standardize
//! with training statistics -> fit forest -> ALCD table -> paired sign-flip
//! tests -> PFI (and optionally the relearn oracle). Everything is keyed off
//! a per-run seed so reruns are bit-identical and runs can execute on any
//! schedule.

use rayon::prelude::*;
use serde_json::json;
use trip_core::alcd::{build_alcd_table, AlcdTable, Metric};
use trip_core::data::{Dataset, SplitSpec};
use trip_core::forest::Forest;
use trip_core::importance::{pfi_report, relearn_importance, ImportanceReport};
use trip_core::spca::{self, SpcaModel};
use trip_core::stream;
use trip_core::trip::{run_trip, TripResult};

use crate::config::{AuditConfig, CodConfig, DataSource, SimulateConfig};
use crate::error::{CliError, CliResult};

/// Everything produced by one audit run.
#[derive(Clone, Debug)]
pub struct AuditRunOutput {
    pub run: usize,
    pub seed: u64,
    pub table: AlcdTable,
    pub trip: TripResult,
    pub importance: ImportanceReport,
    pub relearn: Option<Vec<f64>>,
    /// Sparse-PCA byproducts, present for spca-audit runs.
    pub spca: Option<SpcaRunOutput>,
}

#[derive(Clone, Debug)]
pub struct SpcaRunOutput {
    pub lambda1: f64,
    pub model: SpcaModel,
    /// Pearson correlations of the evaluation-set component scores.
    pub score_correlations: Vec<Vec<f64>>,
    /// Evaluation-set component scores as a dataset (PC columns + target).
    pub eval_scores: Dataset,
}

/// All runs of one audit, plus the names of the audited columns.
#[derive(Clone, Debug)]
pub struct AuditBundle {
    pub feature_names: Vec<String>,
    pub baseline_index: usize,
    pub runs: Vec<AuditRunOutput>,
}

impl AuditBundle {
    /// Pooled p-values of one feature over all runs and repetitions.
    pub fn pooled_p_values(&self, feature: usize) -> Vec<f64> {
        self.runs
            .iter()
            .flat_map(|r| r.trip.feature_p_values(feature))
            .collect()
    }

    /// Pooled PFI scores of one feature over all runs and repetitions.
    pub fn pooled_pfi(&self, feature: usize) -> Vec<f64> {
        self.runs
            .iter()
            .flat_map(|r| r.importance.pfi[feature].iter().copied())
            .collect()
    }

    /// Per-feature medians/quartiles of p-values and PFI moments.
    pub fn summary_json(&self) -> serde_json::Value {
        let features: Vec<serde_json::Value> = (0..self.feature_names.len())
            .map(|j| {
                let mut entry = json!({
                    "feature": self.feature_names[j],
                });
                if j != self.baseline_index {
                    let mut ps = self.pooled_p_values(j);
                    let (q1, median, q3) = quartiles(&mut ps);
                    entry["p_value"] = json!({"q1": q1, "median": median, "q3": q3});
                }
                let pfi = self.pooled_pfi(j);
                entry["pfi"] = json!({"mean": mean(&pfi), "sd": sd(&pfi)});
                let alcd_mean = mean(
                    &self
                        .runs
                        .iter()
                        .map(|r| r.table.feature_mean(j))
                        .collect::<Vec<_>>(),
                );
                entry["alcd_mean"] = json!(alcd_mean);
                if let Some(first) = self.runs.first() {
                    if first.relearn.is_some() {
                        let scores: Vec<f64> = self
                            .runs
                            .iter()
                            .filter_map(|r| r.relearn.as_ref().map(|v| v[j]))
                            .collect();
                        entry["relearn_mean"] = json!(mean(&scores));
                    }
                }
                entry
            })
            .collect();
        json!({
            "baseline": self.feature_names[self.baseline_index],
            "runs": self.runs.len(),
            "features": features,
        })
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Type-7 quartiles (linear interpolation) of a sample; sorts in place.
pub fn quartiles(values: &mut [f64]) -> (f64, f64, f64) {
    values.sort_by(f64::total_cmp);
    let q = |p: f64| -> f64 {
        let h = (values.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let frac = h - lo as f64;
        if lo + 1 < values.len() {
            values[lo] + frac * (values[lo + 1] - values[lo])
        } else {
            values[lo]
        }
    };
    (q(0.25), q(0.5), q(0.75))
}

pub fn median(values: &mut [f64]) -> f64 {
    quartiles(values).1
}

fn load_source(source: &DataSource, run_seed: u64) -> CliResult<Dataset> {
    match source {
        DataSource::Csv { path, target, task } => {
            Ok(Dataset::load_csv(path, target, *task)?)
        }
        DataSource::Generator(spec) => {
            let mut per_run = spec.clone();
            per_run.seed = stream::derive(run_seed, &[stream::TAG_GENERATOR]);
            Ok(per_run.generate()?)
        }
    }
}

fn split_dataset(ds: &Dataset, fraction: f64, seed: u64) -> CliResult<(Dataset, Dataset)> {
    if fraction >= 1.0 {
        // no held-out split: evaluate on the training set
        return Ok((ds.clone(), ds.clone()));
    }
    Ok(ds.split(&SplitSpec {
        train_fraction: fraction,
        seed,
    })?)
}

/// Keeps the `fraction` of columns with the greatest training-split variance.
fn top_variance_filter(
    train: &Dataset,
    eval: &Dataset,
    fraction: f64,
) -> CliResult<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CliError::Input(format!(
            "top-variance fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let p = train.p();
    let keep = ((fraction * p as f64).round() as usize).clamp(1, p);
    let mut variances: Vec<(f64, usize)> = (0..p)
        .map(|j| {
            let col = train.column(j);
            let m = mean(&col);
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (col.len() - 1) as f64;
            (var, j)
        })
        .collect();
    variances.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut kept: Vec<usize> = variances[..keep].iter().map(|&(_, j)| j).collect();
    kept.sort_unstable();
    Ok((train.select_features(&kept)?, eval.select_features(&kept)?))
}

fn pearson_correlations(ds: &Dataset) -> Vec<Vec<f64>> {
    let p = ds.p();
    let cols: Vec<Vec<f64>> = (0..p).map(|j| ds.column(j)).collect();
    let means: Vec<f64> = cols.iter().map(|c| mean(c)).collect();
    let mut out = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..=i {
            let mut cov = 0.0;
            let mut var_i = 0.0;
            let mut var_j = 0.0;
            for (vi, vj) in cols[i].iter().zip(&cols[j]) {
                let a = vi - means[i];
                let b = vj - means[j];
                cov += a * b;
                var_i += a * a;
                var_j += b * b;
            }
            let denom = (var_i * var_j).sqrt();
            let r = if denom > 0.0 { cov / denom } else { 0.0 };
            out[i][j] = r;
            out[j][i] = r;
        }
    }
    out
}

/// Inputs of one run after data preparation: standardized train and
/// evaluation sets with the baseline column appended.
pub struct PreparedRun {
    pub run: usize,
    pub seed: u64,
    pub train: Dataset,
    pub eval: Dataset,
    pub spca: Option<SpcaRunOutput>,
}

/// Prepares one run: (generate or load) -> split -> optional column filter ->
/// optional sparse-PCA reduction -> baseline injection -> standardization
/// fitted on the training split.
pub fn prepare_run(cfg: &AuditConfig, run: usize) -> CliResult<PreparedRun> {
    let run_seed = stream::derive(cfg.seed, &[stream::TAG_RUN, run as u64]);
    let dataset = load_source(&cfg.source, run_seed)?;
    let (mut train, mut eval) = split_dataset(&dataset, cfg.train_fraction, run_seed)?;

    if let Some(fraction) = cfg.top_variance {
        let (t, e) = top_variance_filter(&train, &eval, fraction)?;
        train = t;
        eval = e;
    }

    let mut spca_output = None;
    if let Some(spca_cfg) = &cfg.spca {
        let grid = match &spca_cfg.lambda1_grid {
            Some(grid) => grid.clone(),
            None => spca::default_lambda1_grid(train.features(), 25)?,
        };
        let (lambda1, model) = spca::sparsity_path(
            train.features(),
            spca_cfg.components,
            spca_cfg.lambda2,
            &grid,
            spca_cfg.sparsity_target,
        )?;
        let train_scores = model.transform_dataset(&train)?;
        let eval_scores = model.transform_dataset(&eval)?;
        let score_correlations = pearson_correlations(&eval_scores);
        spca_output = Some(SpcaRunOutput {
            lambda1,
            model,
            score_correlations,
            eval_scores: eval_scores.clone(),
        });
        train = train_scores;
        eval = eval_scores;
    }

    let train = train.add_baseline(stream::derive(run_seed, &[stream::TAG_BASELINE, 0]))?;
    let eval = eval.add_baseline(stream::derive(run_seed, &[stream::TAG_BASELINE, 1]))?;
    // Standardization is fitted on the training split only and applied to
    // both splits, keeping the evaluation data out of the distance geometry.
    let (train_std, record) = train.standardize()?;
    let eval_std = record.apply(&eval)?;

    Ok(PreparedRun {
        run,
        seed: run_seed,
        train: train_std,
        eval: eval_std,
        spca: spca_output,
    })
}

/// Executes one audit run end to end.
pub fn audit_one_run(cfg: &AuditConfig, run: usize) -> CliResult<AuditRunOutput> {
    let metric = Metric::new(cfg.metric_exponent)?;
    let prepared = prepare_run(cfg, run)?;
    let run_seed = prepared.seed;
    let (train_std, eval_std) = (&prepared.train, &prepared.eval);

    let forest = Forest::fit(train_std, &cfg.forest, run_seed)?;
    let table = build_alcd_table(
        &forest,
        eval_std,
        train_std.features(),
        cfg.repetitions,
        metric,
        run_seed,
    )?;
    let trip = run_trip(&table, cfg.rounds, run_seed)?;
    let mut importance = pfi_report(&forest, eval_std, cfg.repetitions, run_seed)?;

    let relearn = if cfg.relearn {
        let scores: trip_core::Result<Vec<f64>> = (0..train_std.p())
            .map(|j| relearn_importance(train_std, eval_std, j, &cfg.forest, run_seed))
            .collect();
        let scores = scores?;
        importance.relearn = Some(scores.clone());
        Some(scores)
    } else {
        None
    };

    Ok(AuditRunOutput {
        run,
        seed: run_seed,
        table,
        trip,
        importance,
        relearn,
        spca: prepared.spca,
    })
}

/// Runs the full audit: `cfg.runs` independent runs, in parallel.
pub fn run_audit(cfg: &AuditConfig) -> CliResult<AuditBundle> {
    if cfg.runs == 0 {
        return Err(CliError::Input("runs must be at least 1".into()));
    }
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0) {
        return Err(CliError::Input(format!(
            "train fraction must lie in (0, 1], got {}",
            cfg.train_fraction
        )));
    }
    let runs: CliResult<Vec<AuditRunOutput>> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| audit_one_run(cfg, run))
        .collect();
    let runs = runs?;
    let first = &runs[0];
    let feature_names = first.table.feature_names().to_vec();
    let baseline_index = first
        .table
        .baseline_index()
        .expect("audit always injects a baseline");
    Ok(AuditBundle {
        feature_names,
        baseline_index,
        runs,
    })
}

/// One cell of the dimensionality sweep.
#[derive(Clone, Debug, serde::Serialize)]
pub struct CodCell {
    pub n: usize,
    pub p: usize,
    pub exponent: f64,
    /// Mean TRIP p-value over features inside correlated blocks.
    pub mean_p_dependent: f64,
    /// Mean over leftover independent features; NaN when every feature is in
    /// a block.
    pub mean_p_independent: f64,
}

#[derive(Clone, Debug)]
pub struct CodReport {
    pub cells: Vec<CodCell>,
}

impl CodReport {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("n,p,exponent,mean_p_dependent,mean_p_independent\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.n, c.p, c.exponent, c.mean_p_dependent, c.mean_p_independent
            ));
        }
        out
    }
}

/// Runs the sweep: for every (n, p, exponent) cell, audits `runs` fresh
/// block datasets and averages the TRIP p-values over dependent and leftover
/// independent features.
pub fn run_cod(cfg: &CodConfig) -> CliResult<CodReport> {
    let specs = trip_core::simgen::cod_suite(&cfg.n_list, &cfg.p_list, cfg.rho, cfg.seed);
    let mut cells = Vec::new();
    for spec in &specs {
        for &exponent in &cfg.exponents {
            let audit_cfg = AuditConfig {
                source: DataSource::Generator(spec.clone()),
                train_fraction: cfg.train_fraction,
                forest: cfg.forest,
                metric_exponent: exponent,
                repetitions: cfg.repetitions,
                rounds: cfg.rounds,
                runs: cfg.runs,
                // distinct seed per cell so cells are independent experiments
                seed: stream::derive(
                    cfg.seed,
                    &[spec.n as u64, spec.p as u64, exponent.to_bits()],
                ),
                relearn: false,
                top_variance: None,
                spca: None,
            };
            let bundle = run_audit(&audit_cfg)?;
            let dependent = spec.dependent_features();
            let independent = spec.independent_features();
            let pooled = |features: &[usize]| -> f64 {
                if features.is_empty() {
                    return f64::NAN;
                }
                let all: Vec<f64> = features
                    .iter()
                    .flat_map(|&j| bundle.pooled_p_values(j))
                    .collect();
                mean(&all)
            };
            cells.push(CodCell {
                n: spec.n,
                p: spec.p,
                exponent,
                mean_p_dependent: pooled(&dependent),
                mean_p_independent: pooled(&independent),
            });
        }
    }
    Ok(CodReport { cells })
}

/// Output of `simulate`: one dataset per run with its seed.
pub struct SimulatedRun {
    pub run: usize,
    pub seed: u64,
    pub dataset: Dataset,
}

pub fn run_simulate(cfg: &SimulateConfig) -> CliResult<Vec<SimulatedRun>> {
    if cfg.runs == 0 {
        return Err(CliError::Input("runs must be at least 1".into()));
    }
    (0..cfg.runs)
        .map(|run| {
            let run_seed = stream::derive(
                cfg.seed,
                &[stream::TAG_RUN, run as u64, stream::TAG_GENERATOR],
            );
            let mut spec = cfg.spec.clone();
            spec.seed = run_seed;
            Ok(SimulatedRun {
                run,
                seed: run_seed,
                dataset: spec.generate()?,
            })
        })
        .collect()
}
