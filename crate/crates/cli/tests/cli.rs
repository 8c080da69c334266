use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn xappctl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xappctl"))
        .current_dir(dir)
        .env("ARTIFACT_DIR", dir.join("store"))
        .arg("--fixed-ts")
        .args(args)
        .stdin(Stdio::null())
        .output()
        .expect("spawn xappctl")
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = xappctl(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn read_artifact(dir: &Path, uri: &str) -> String {
    let hex = uri.strip_prefix("artifact://").unwrap();
    std::fs::read_to_string(dir.join("store/artifacts").join(&hex[..2]).join(hex)).unwrap()
}

/// A quick scenario and a short training run.
fn trained(dir: &Path) -> Value {
    write(dir, "sim.json", r#"{"num_ues":10,"area_side":70.0,"duration":60,"dt":1.0,"seed":4,"policy":"PriorityActiveStandby","app_mix":0.5}"#);
    write(dir, "train.json", r#"{"epochs":15}"#);
    ok(dir, &["simulate", "--config", "sim.json", "--out", "data.csv"]);
    ok(dir, &["train", "--data", "data.csv", "--config", "train.json", "--out-dir", "runs"])
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(xappctl(dir.path(), &["frobnicate"]).status.code(), Some(2));
    let out = xappctl(dir.path(), &["verify", "--model", "m.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--data"));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["kind"], "usage");
}

#[test]
fn bad_flag_values_name_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = xappctl(dir.path(), &["verify", "--model", "m.json", "--data", "t.csv", "--epsilon=-1"]);
    assert_eq!(out.status.code(), Some(2));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(doc["error"].as_str().unwrap().starts_with("--epsilon"));
}

#[test]
fn simulate_train_verify_explain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let t = trained(d);
    let uri = t["model_uri"].as_str().unwrap();
    assert!(uri.starts_with("artifact://"));
    assert!(t["test_accuracy"].as_f64().unwrap() > 0.5);

    let v0 = ok(d, &["verify", "--model", uri, "--data", "runs/test.csv", "--epsilon", "0"]);
    assert_eq!(v0["fraction"].as_f64(), Some(1.0));

    let v = ok(d, &["verify", "--model", "runs/model.json", "--data", "runs/test.csv", "--epsilon", "0.05", "--out", "report.json", "--plot-data", "bands.csv"]);
    let f = v["fraction"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f));
    let plot = std::fs::read_to_string(d.join("bands.csv")).unwrap();
    assert!(plot.starts_with("index,lower_0,upper_0,lower_1,upper_1,logit_0,logit_1,label\n"));
    assert_eq!(plot.lines().count() as u64, v["n_test"].as_u64().unwrap() + 1);

    let e = ok(d, &["explain", "--model", uri, "--data", "runs/test.csv", "--background", "runs/train.csv", "--permutations", "10", "--max-samples", "5", "--out", "ranking.csv"]);
    assert_eq!(e["ranking"].as_array().unwrap().len(), 25);
    let csv = std::fs::read_to_string(d.join("ranking.csv")).unwrap();
    assert!(csv.starts_with("feature_name,mean_abs_phi,rank\n"));
}

#[test]
fn fixed_ts_runs_replay_identically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(trained(a.path()), trained(b.path()));
    assert_eq!(
        std::fs::read(a.path().join("runs/model.json")).unwrap(),
        std::fs::read(b.path().join("runs/model.json")).unwrap()
    );
}

#[test]
fn plane_register_deploy_status_release() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "pool.json", r#"{"capacity":{"gpu_flops":100,"gpu_mem":100,"mem":100,"cpu_cores":8}}"#);
    write(
        d,
        "m.json",
        r#"{"id":"tc","vertices":["DataIngestion","ModelTrain"],"edges":[["DataIngestion","ModelTrain"]],
            "preconditions":{"min_mem":60},"kpm_metrics":["latency_ms"]}"#,
    );
    assert_eq!(xappctl(d, &["plane", "deploy", "--manifest", "tc"]).status.code(), Some(2));
    ok(d, &["plane", "register", "--manifest", "m.json", "--pool", "pool.json"]);
    let first = ok(d, &["plane", "deploy", "--manifest", "tc"]);
    assert_eq!(first["state"]["state"], "Running");
    let second = ok(d, &["plane", "deploy", "--manifest", "tc"]);
    assert_eq!(second["state"]["state"], "RiskEvaluated");
    let missing = ok(d, &["plane", "deploy", "--manifest", "nope"]);
    assert_eq!(missing["state"]["state"], "NotFound");

    let id = first["deployment_id"].as_str().unwrap();
    let status = ok(d, &["plane", "status", "--deployment", id]);
    assert_eq!(status["reservation"]["mem"], 60);
    let rel = ok(d, &["plane", "release", "--deployment", id]);
    assert_eq!(rel["available"]["mem"], 100);
    assert_eq!(xappctl(d, &["plane", "status", "--deployment", "dep-9999"]).status.code(), Some(1));
}

#[test]
fn pipeline_gate_publish_and_infer() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "train.json", r#"{"epochs":15}"#);
    write(d, "lax.json", r#"{"min_accuracy":0.5,"min_separation_fraction":0.0,"epsilon":0.05,"require_explanation_report":true}"#);
    write(d, "strict.json", r#"{"min_accuracy":1.0,"min_separation_fraction":1.0,"epsilon":0.05}"#);
    let common = ["pipeline", "run", "--steps", "20", "--train-config", "train.json", "--permutations", "10"];

    let mut args = common.to_vec();
    args.extend(["--criteria", "strict.json"]);
    let rejected = ok(d, &args);
    assert_eq!(rejected["verdict"], "Reject");
    assert!(rejected["xapp_id"].is_null());

    let mut args = common.to_vec();
    args.extend(["--criteria", "lax.json"]);
    let published = ok(d, &args);
    assert_eq!(published["verdict"], "Publish");
    assert_eq!(published["xapp_id"], "traffic-classifier@1");
    let stages: Vec<&str> = published["stage_log"].as_array().unwrap().iter().map(|r| r["stage"].as_str().unwrap()).collect();
    assert_eq!(stages.last(), Some(&"gate"));

    let test_csv = read_artifact(d, published["artifacts"]["test_split"].as_str().unwrap());
    let row: Vec<f64> = test_csv.lines().nth(1).unwrap().split(',').skip(2).map(|v| v.parse().unwrap()).collect();
    write(d, "x.json", &serde_json::to_string(&row).unwrap());
    let plain = ok(d, &["infer", "--xapp", "traffic-classifier", "--input", "x.json"]);
    assert!(plain.get("explanation").is_none());
    let a = ok(d, &["infer", "--xapp", "traffic-classifier@1", "--input", "x.json", "--explain"]);
    let b = ok(d, &["infer", "--xapp", "traffic-classifier@1", "--input", "x.json", "--explain"]);
    assert_eq!(a, b);
    assert_eq!(a["label"], plain["label"]);
    assert_eq!(a["explanation"]["phi"].as_array().unwrap().len(), 25);

    write(d, "short.json", "[1.0, 2.0]");
    assert_eq!(xappctl(d, &["infer", "--xapp", "traffic-classifier@1", "--input", "short.json"]).status.code(), Some(1));
    assert_eq!(xappctl(d, &["infer", "--xapp", "ghost@1", "--input", "x.json"]).status.code(), Some(1));
}

#[test]
fn pending_decision_needs_the_operator() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "train.json", r#"{"epochs":5}"#);
    write(d, "crit.json", r#"{"min_accuracy":0.0,"min_separation_fraction":0.0,"epsilon":0.05,"require_explanation_report":true}"#);
    let args = ["pipeline", "run", "--steps", "10", "--train-config", "train.json", "--criteria", "crit.json", "--no-explain"];
    // An empty answer at the prompt counts as no.
    let declined = ok(d, &args);
    assert_eq!(declined["verdict"], "Reject");
    assert_eq!(declined["decision"]["operator_override"]["action"], "reject");

    let mut auto = args.to_vec();
    auto.extend(["--auto-approve", "--operator-id", "ann"]);
    let approved = ok(d, &auto);
    assert_eq!(approved["verdict"], "Publish");
    assert_eq!(approved["decision"]["operator_override"]["operator_id"], "ann");
    assert!(approved["package"]["explanation_uri"].is_null());
}

#[test]
fn default_pipeline_run_publishes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["pipeline", "run", "--auto-approve"]);
    assert_eq!(out["verdict"], "Publish", "{out:#}");
    assert_eq!(out["xapp_id"], "traffic-classifier@1");
}
