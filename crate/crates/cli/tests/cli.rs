//! Black-box tests of the `trip` binary: flags, config files, file outputs,
//! reproducibility, and exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

fn trip() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trip"))
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("trip_cli_tests").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

#[test]
fn audit_writes_reports_and_is_reproducible() {
    let out_a = temp_dir("audit_a");
    let out_b = temp_dir("audit_b");
    for out in [&out_a, &out_b] {
        let status = trip()
            .args([
                "audit",
                "--kind",
                "two-correlated",
                "--n",
                "120",
                "--runs",
                "2",
                "--reps",
                "3",
                "--pi",
                "400",
                "--trees",
                "20",
                "--min-leaf",
                "2",
                "--seed",
                "5",
                "--out",
            ])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    for file in [
        "manifest.json",
        "summary.json",
        "run_000/alcd.csv",
        "run_000/pvalues.csv",
        "run_000/importances.csv",
        "run_001/alcd.csv",
    ] {
        assert!(out_a.join(file).exists(), "{file} missing");
        assert_eq!(
            read(&out_a.join(file)),
            read(&out_b.join(file)),
            "{file} differs between identical reruns"
        );
    }
    // pvalues.csv: 8 features + baseline tested -> 8 features x 3 reps rows
    let pvalues = read(&out_a.join("run_000/pvalues.csv"));
    assert_eq!(pvalues.lines().count(), 1 + 8 * 3);
    // manifest embeds the config and per-run seeds
    let manifest: serde_json::Value =
        serde_json::from_str(&read(&out_a.join("manifest.json"))).unwrap();
    assert_eq!(manifest["kind"], "audit");
    assert_eq!(manifest["config"]["seed"], 5);
    assert_eq!(manifest["runs"].as_array().unwrap().len(), 2);
    assert!(manifest["runs"][0]["seed"].as_u64().is_some());
}

#[test]
fn audit_csv_source_runs() {
    let out = temp_dir("audit_csv");
    let wine = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/wine.csv");
    let status = trip()
        .args([
            "audit",
            "--csv",
            wine,
            "--target",
            "cultivar",
            "--task",
            "classification",
            "--runs",
            "1",
            "--reps",
            "2",
            "--pi",
            "200",
            "--trees",
            "15",
            "--seed",
            "8",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let summary: serde_json::Value = serde_json::from_str(&read(&out.join("summary.json"))).unwrap();
    // 13 wine features + baseline
    assert_eq!(summary["features"].as_array().unwrap().len(), 14);
    assert_eq!(summary["baseline"], "BASELINE");
}

#[test]
fn missing_csv_exits_with_input_code() {
    let out = temp_dir("audit_missing");
    let status = trip()
        .args([
            "audit",
            "--csv",
            "/no/such/file.csv",
            "--target",
            "y",
            "--task",
            "regression",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn bad_flag_combination_exits_with_input_code() {
    let out = temp_dir("audit_badflags");
    let status = trip()
        .args(["audit", "--csv", "/tmp/x.csv", "--out"]) // missing --target/--task
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn non_positive_definite_covariance_exits_with_numerical_code() {
    let out = temp_dir("audit_non_pd");
    // rho <= -1/(k-1) makes the block covariance indefinite
    let status = trip()
        .args([
            "audit",
            "--kind",
            "equal-blocks",
            "--n",
            "60",
            "--p",
            "6",
            "--block-size",
            "3",
            "--rho",
            "-0.9",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn simulate_embeds_seed_in_filenames() {
    let out = temp_dir("simulate");
    let status = trip()
        .args([
            "simulate",
            "--kind",
            "circle",
            "--n",
            "60",
            "--runs",
            "3",
            "--seed",
            "11",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&read(&out.join("manifest.json"))).unwrap();
    let runs = manifest["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    for entry in runs {
        let file = entry["file"].as_str().unwrap();
        assert!(file.contains(&format!("seed_{}", entry["seed"])));
        let csv = read(&out.join(file));
        assert_eq!(csv.lines().count(), 61); // header + 60 rows
        assert!(csv.starts_with("V1,V2,V3,V4,V5,V6,V7,V8,y"));
    }
}

#[test]
fn config_file_with_flag_overrides() {
    let out = temp_dir("config_file");
    let config = serde_json::json!({
        "source": {"type": "generator", "kind": "equal_blocks", "n": 80, "p": 6,
                    "rhos": [0.6], "block_size": 3, "noise_sd": 0.1, "seed": 3},
        "train_fraction": 0.75,
        "forest": {"trees": 10, "mtry": null, "min_leaf": 2, "max_depth": null},
        "metric_exponent": 2.0,
        "repetitions": 2,
        "rounds": 200,
        "runs": 1,
        "seed": 3,
        "relearn": false,
        "top_variance": null,
        "spca": null
    });
    let config_path = out.join("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    // override runs via flag
    let status = trip()
        .args(["audit", "--config"])
        .arg(&config_path)
        .args(["--runs", "2", "--out"])
        .arg(out.join("reports"))
        .status()
        .unwrap();
    assert!(status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&read(&out.join("reports/manifest.json"))).unwrap();
    assert_eq!(manifest["config"]["runs"], 2); // flag wins
    assert_eq!(manifest["config"]["rounds"], 200); // config value kept
    assert!(out.join("reports/run_001/pvalues.csv").exists());
}

#[test]
fn cod_writes_grid_csv() {
    let out = temp_dir("cod");
    let status = trip()
        .args([
            "cod",
            "--n-list",
            "60",
            "--p-list",
            "10,20",
            "--exponents",
            "0.5,2",
            "--reps",
            "2",
            "--pi",
            "200",
            "--runs",
            "1",
            "--trees",
            "15",
            "--min-leaf",
            "2",
            "--seed",
            "6",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = read(&out.join("cod.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,p,exponent,mean_p_dependent,mean_p_independent");
    assert_eq!(lines.len(), 1 + 2 * 2); // (p values) x (exponents)
    for line in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 5);
        let dependent: f64 = fields[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&dependent));
    }
}

#[test]
fn spca_audit_writes_component_reports() {
    let out = temp_dir("spca_audit");
    let status = trip()
        .args([
            "spca-audit",
            "--kind",
            "equal-blocks",
            "--n",
            "90",
            "--p",
            "20",
            "--block-size",
            "10",
            "--rho",
            "0.8",
            "--components",
            "2",
            "--runs",
            "1",
            "--reps",
            "2",
            "--pi",
            "200",
            "--trees",
            "15",
            "--min-leaf",
            "3",
            "--seed",
            "12",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("run_000/spca_model.json").exists());
    let scores = read(&out.join("run_000/scores.csv"));
    assert!(scores.starts_with("PC1,PC2,y"));
    let corr = read(&out.join("run_000/score_correlations.csv"));
    assert!(corr.starts_with("component,PC1,PC2"));
    let model: serde_json::Value =
        serde_json::from_str(&read(&out.join("run_000/spca_model.json"))).unwrap();
    assert_eq!(model["components"], 2);
    assert_eq!(model["weights"].as_array().unwrap().len(), 20);
    let manifest: serde_json::Value =
        serde_json::from_str(&read(&out.join("manifest.json"))).unwrap();
    assert_eq!(manifest["kind"], "spca-audit");
}
