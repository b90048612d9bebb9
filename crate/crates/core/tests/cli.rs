use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use amsopt::population::{PopulationFile, Scorer};
use serde_json::Value;

fn amsopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amsopt")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = amsopt(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn generate_draw_train_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let (pop, sample, scorer, scored) = (
        path(dir.path(), "pop.json"),
        path(dir.path(), "s.csv"),
        path(dir.path(), "f.json"),
        path(dir.path(), "v.csv"),
    );

    ok(&["gen-pop", "--cells", "6", "--seed", "3", "--out", &pop]);
    let file = PopulationFile::load(&pop).unwrap();
    assert_eq!(file.cells.len(), 6);

    ok(&["draw", "--population", &pop, "--n", "2000", "--seed", "1", "--out", &sample]);
    let text = fs::read_to_string(&sample).unwrap();
    assert!(text.starts_with("y,weight,cell_id\n"));
    assert_eq!(text.lines().count(), 2001);

    ok(&["train", "--sample", &sample, "--population", &pop, "--out", &scorer]);
    let f: Scorer = serde_json::from_str(&fs::read_to_string(&scorer).unwrap()).unwrap();
    assert_eq!(f.len(), 6);

    let exact = ok(&["sweep", "--population", &pop, "--scorer", &scorer, "--format", "json"]);
    let v: Value = serde_json::from_slice(&exact.stdout).unwrap();
    assert!(v["best_ams"].as_f64().unwrap() > 0.0);
    assert!(v["curve"].as_array().unwrap().len() >= 2);

    fs::write(&scored, "score,y,weight\n2.0,1,1\n1.0,-1,1\n").unwrap();
    let out = ok(&["sweep", "--scored", &scored, "--b-reg", "0.1", "--format", "json"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["best_theta"].as_f64().unwrap(), 1.5);
    let csv = ok(&["sweep", "--scored", &scored, "--b-reg", "0.1"]);
    assert!(String::from_utf8(csv.stdout).unwrap().starts_with("theta,s,b,ams\n"));
}

#[test]
fn train_on_features_fits_a_linear_scorer() {
    let dir = tempfile::tempdir().unwrap();
    let sample = path(dir.path(), "x.csv");
    fs::write(&sample, "y,f1\n1,1.0\n1,2.0\n-1,1.5\n-1,-1.0\n1,-0.5\n-1,-2.0\n").unwrap();
    let out = ok(&["train", "--sample", &sample]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["converged"], Value::Bool(true));
    assert!(v["scorer"]["coefficients"][0].as_f64().unwrap() > 0.0);
}

#[test]
fn verification_commands_write_reports() {
    let out = ok(&["verify-lemma1", "--trials", "20"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "trial,n_train,m_valid,R_log,R_ams_hat,R_ams_star,bound_paper,bound_gradient,holds_paper,holds_gradient"
    );
    assert_eq!(lines.count(), 20);

    let out = ok(&["verify-lemma1", "--surrogate", "squared-error", "--trials", "20", "--format", "json"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["asserted_failures"], 0);

    let out = ok(&["verify-theorem1", "--trials", "3", "--format", "json"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["reports"].as_array().unwrap().len(), 12);
    assert_eq!(v["summary"]["bounds_asserted"], Value::Bool(true));

    ok(&["verify-theorem1", "--trials", "3", "--validation", "empirical", "--b-reg", "0.01"]);
    let out = ok(&["check-metric", "--trials", "500"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["trials"], 500);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = path(dir.path(), "c.json");
    fs::write(&config, r#"{"trials": 4, "cell_count_range": [3, 4], "convergence_cells": 200}"#).unwrap();
    let out = ok(&["verify-lemma1", "--config", &config, "--seed", "9"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 5);

    let out = ok(&["convergence", "--config", &config, "--b-reg", "0.01"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("m,seed,tuning_regret\n"));
    assert_eq!(text.lines().count(), 1 + 4 * 4);
}

#[test]
fn errors_exit_with_code_two() {
    let bad = amsopt(&["verify-lemma1", "--trials", "0"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("trials"));
    let missing_b_reg = amsopt(&["convergence", "--trials", "2"]);
    assert_eq!(missing_b_reg.status.code(), Some(2));
    let failing_metric = amsopt(&["check-metric", "--b-reg", "-1"]);
    assert_eq!(failing_metric.status.code(), Some(2));
}
