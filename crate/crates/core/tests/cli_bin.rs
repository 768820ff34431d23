use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gpfusion::cli::{ExperimentReport, TreeEvaluation};
use gpfusion::datasets::load_dataset;
use gpfusion::metrics::gain;

fn gpfusion(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpfusion"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = gpfusion(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn report(dir: &Path) -> ExperimentReport {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn gen_synth_round_trips_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let p = path.to_str().unwrap();
    ok(&[
        "gen-synth", "--modalities", "3", "--genuine-mean", "2,1,0.5", "--impostor-mean", "0",
        "--genuine-count", "40", "--impostor-count", "70", "--seed", "3", "--out", p,
    ]);
    let ds = load_dataset(&path, 3).unwrap();
    assert_eq!((ds.genuine.len(), ds.impostor.len()), (40, 70));
    let again = dir.path().join("t.csv");
    ok(&[
        "gen-synth", "--modalities", "3", "--genuine-mean", "2,1,0.5", "--impostor-mean", "0",
        "--genuine-count", "40", "--impostor-count", "70", "--seed", "3", "--out", again.to_str().unwrap(),
    ]);
    assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn separable_gp_run_has_zero_validation_eer() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&[
        "run", "--synth-preset", "separable", "--methods", "gp", "--gp-generations", "5",
        "--gp-population", "100", "--seed", "1", "--out", out.to_str().unwrap(),
    ]);
    let r = report(&out);
    assert_eq!(r.method("gp").unwrap().validation_eer, 0.0);
    assert!(r.gains.is_none());
    assert!(out.join("best_tree.sexp").exists());
    assert!(out.join("gp_history.csv").exists());
    assert!(out.join("roc_gp.csv").exists());
}

#[test]
fn sum_weight_run_reports_gain() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&["run", "--synth-preset", "banca", "--methods", "sum,weight", "--seed", "2", "--out", out.to_str().unwrap()]);
    let r = report(&out);
    let names: Vec<&str> = r.methods.iter().map(|m| m.method.as_str()).collect();
    assert_eq!(names, ["s1", "s2", "s3", "s4", "sum", "weight"]);
    let weight = r.method("weight").unwrap();
    let sum = r.method("sum").unwrap();
    let g = r.gains.as_ref().unwrap().iter().find(|g| g.method == "sum").unwrap();
    assert_eq!(g.eer, gain(weight.validation_eer, sum.validation_eer).ok());
    assert_eq!(r.weights.as_ref().unwrap().len(), 4);
    for m in &r.methods {
        for v in [m.train_eer, m.validation_eer, m.validation_hter, m.validation_auc] {
            assert!((0.0..=1.0).contains(&v));
        }
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(gpfusion(&["run", "--synth-preset", "banca", "--methods", "svm", "--out", out]).status.code(), Some(2));
    assert_eq!(gpfusion(&["run", "--out", out]).status.code(), Some(2));
    assert_eq!(gpfusion(&["run", "--input", "x.csv", "--out", out]).status.code(), Some(2));
    assert_eq!(gpfusion(&["run", "--synth-preset", "nope", "--out", out]).status.code(), Some(2));
    assert_eq!(gpfusion(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let r = gpfusion(&["run", "--input", "/nonexistent/scores.csv", "--modalities", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "0.1,0.2,genuine\n0.3,impostor\n").unwrap();
    let r = gpfusion(&["run", "--input", bad.to_str().unwrap(), "--modalities", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains(":2:"));
}

#[test]
fn eval_tree_replays_report() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.csv");
    ok(&["gen-synth", "--preset", "banca", "--seed", "4", "--out", scores.to_str().unwrap()]);
    let out = dir.path().join("run");
    ok(&[
        "run", "--input", scores.to_str().unwrap(), "--modalities", "4", "--methods", "gp",
        "--gp-generations", "4", "--gp-population", "80", "--seed", "4", "--out", out.to_str().unwrap(),
    ]);
    let r = report(&out);
    let gp = r.method("gp").unwrap();
    let threshold = format!("{}", gp.train_eer_threshold);
    let text = ok(&[
        "eval-tree", "--tree", out.join("best_tree.sexp").to_str().unwrap(),
        "--input", scores.to_str().unwrap(), "--modalities", "4",
        "--params", out.join("normalization.json").to_str().unwrap(),
        "--split", "validation", "--threshold", &threshold,
    ]);
    let e: TreeEvaluation = serde_json::from_str(&text).unwrap();
    assert_eq!(e.eer, gp.validation_eer);
    assert_eq!(e.auc, gp.validation_auc);
    assert_eq!(e.hter, gp.validation_hter);

    let text = ok(&[
        "eval-tree", "--tree", out.join("best_tree.sexp").to_str().unwrap(),
        "--input", scores.to_str().unwrap(), "--modalities", "4",
        "--params", out.join("normalization.json").to_str().unwrap(), "--split", "train",
    ]);
    let e: TreeEvaluation = serde_json::from_str(&text).unwrap();
    assert_eq!(e.eer, gp.train_eer);
    assert_eq!(e.eer_threshold, gp.train_eer_threshold);
}

#[test]
fn eval_tree_rejects_bad_trees() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.csv");
    ok(&["gen-synth", "--preset", "banca", "--out", scores.to_str().unwrap()]);
    let params = dir.path().join("params.json");
    fs::write(&params, r#"{"modalities":[{"mean":0,"std":1},{"mean":0,"std":1},{"mean":0,"std":1},{"mean":0,"std":1}]}"#).unwrap();
    let tree = dir.path().join("t.sexp");
    let run = |sexpr: &str| {
        fs::write(&tree, sexpr).unwrap();
        gpfusion(&[
            "eval-tree", "--tree", tree.to_str().unwrap(), "--input", scores.to_str().unwrap(),
            "--modalities", "4", "--params", params.to_str().unwrap(),
        ])
    };
    let r = run("(pow (var 0) (var 1))");
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("`pow`"));
    let r = run("(add (var 7) (var 0))");
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("modality mismatch"));
    assert!(run("(add (var 3) (var 0))").status.success());
}
