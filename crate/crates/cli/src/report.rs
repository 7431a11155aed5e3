//! Report writers: per-run CSV tables, pooled JSON summaries, and manifests
//! that embed the full configuration and every seed, so a rerun with the same
//! config reproduces every byte.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::json;

use crate::config::{AuditConfig, CodConfig, SimulateConfig};
use crate::error::{CliError, CliResult};
use crate::pipeline::{AuditBundle, CodReport, SimulatedRun};

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents)
        .map_err(|e| CliError::Input(format!("cannot write `{}`: {e}", path.display())))
}

fn ensure_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path)
        .map_err(|e| CliError::Input(format!("cannot create `{}`: {e}", path.display())))
}

fn pretty(value: &serde_json::Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("json serialization");
    text.push('\n');
    text
}

/// Writes one directory per run (alcd.csv, pvalues.csv, importances.csv, and
/// the sparse-PCA artifacts when present) plus pooled `summary.json` and
/// `manifest.json` at the top level.
pub fn write_audit(bundle: &AuditBundle, cfg: &AuditConfig, out: &Path) -> CliResult<()> {
    ensure_dir(out)?;
    let mut run_entries = Vec::new();
    for run in &bundle.runs {
        let run_dir = out.join(format!("run_{:03}", run.run));
        ensure_dir(&run_dir)?;
        run.table.write_csv(run_dir.join("alcd.csv"))?;
        write_file(
            &run_dir.join("alcd_meta.json"),
            &pretty(&run.table.metadata_json()),
        )?;
        run.trip.write_csv(run_dir.join("pvalues.csv"))?;
        run.importance.write_csv(run_dir.join("importances.csv"))?;
        write_file(
            &run_dir.join("importance_summary.json"),
            &pretty(&run.importance.summary_json()),
        )?;
        if let Some(spca) = &run.spca {
            spca.model.write_json(run_dir.join("spca_model.json"))?;
            spca.eval_scores.write_csv(run_dir.join("scores.csv"), "y")?;
            write_file(
                &run_dir.join("score_correlations.csv"),
                &correlation_csv(&bundle.feature_names, &spca.score_correlations),
            )?;
        }
        run_entries.push(json!({
            "run": run.run,
            "seed": run.seed,
            "dir": format!("run_{:03}", run.run),
            "spca_lambda1": run.spca.as_ref().map(|s| s.lambda1),
        }));
    }
    write_file(&out.join("summary.json"), &pretty(&bundle.summary_json()))?;
    let manifest = json!({
        "kind": if cfg.spca.is_some() { "spca-audit" } else { "audit" },
        "config": serde_json::to_value(cfg).expect("config serialization"),
        "runs": run_entries,
    });
    write_file(&out.join("manifest.json"), &pretty(&manifest))
}

/// Correlation matrix as CSV; the component names are those of the audited
/// dataset minus the baseline column.
fn correlation_csv(feature_names: &[String], matrix: &[Vec<f64>]) -> String {
    let names: Vec<&str> = feature_names
        .iter()
        .take(matrix.len())
        .map(String::as_str)
        .collect();
    let mut out = String::from("component");
    for name in &names {
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    for (i, row) in matrix.iter().enumerate() {
        let _ = write!(out, "{}", names[i]);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Writes the sweep table plus its manifest.
pub fn write_cod(report: &CodReport, cfg: &CodConfig, out: &Path) -> CliResult<()> {
    ensure_dir(out)?;
    write_file(&out.join("cod.csv"), &report.to_csv_string())?;
    let manifest = json!({
        "kind": "cod",
        "config": serde_json::to_value(cfg).expect("config serialization"),
        "cells": report.cells.len(),
    });
    write_file(&out.join("manifest.json"), &pretty(&manifest))
}

/// Writes one CSV per simulated run (seed in the filename) plus a manifest.
pub fn write_simulate(runs: &[SimulatedRun], cfg: &SimulateConfig, out: &Path) -> CliResult<()> {
    ensure_dir(out)?;
    let mut entries = Vec::new();
    for run in runs {
        let filename = format!("run_{:03}_seed_{}.csv", run.run, run.seed);
        run.dataset.write_csv(out.join(&filename), "y")?;
        entries.push(json!({
            "run": run.run,
            "seed": run.seed,
            "file": filename,
            "n": run.dataset.n(),
            "p": run.dataset.p(),
        }));
    }
    let manifest = json!({
        "kind": "simulate",
        "config": serde_json::to_value(cfg).expect("config serialization"),
        "runs": entries,
    });
    write_file(&out.join("manifest.json"), &pretty(&manifest))
}
