mod common;

use common::cli::{neuroloop, ok, pipeline_hashes};

#[test]
fn catalogue_validate_reports_totality() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["catalogue-validate"]);
    assert!(out.contains("ok: 21 entries"), "{out}");
    assert!(out.contains("ok: resolve succeeds for all 21 (layout, action) pairs"), "{out}");

    let mut entries: Vec<serde_json::Value> = serde_json::from_str(neuroloop::adapt::Catalogue::builtin_json()).unwrap();
    entries.pop();
    std::fs::write(dir.path().join("short.json"), serde_json::to_string(&entries).unwrap()).unwrap();
    let out = neuroloop(dir.path(), &["catalogue-validate", "--catalogue", "short.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("missing entry (distribution, full_adaptation)"));
}

#[test]
fn pipeline_is_bit_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(pipeline_hashes(a.path(), 7), pipeline_hashes(b.path(), 7));

    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.path().join("sim.json")).unwrap()).unwrap();
    for layout in report.as_array().unwrap() {
        let rate = |name: &str| {
            layout["policies"].as_array().unwrap().iter().find(|p| p["policy"] == name).unwrap()["optimal_mwl_rate"].as_f64().unwrap()
        };
        assert!(rate("agent") > rate("always_no_adaptation"), "{}", layout["layout"]);
    }
    let eval = ok(a.path(), &["eval", "--data", "graph.jsonl", "--model", "graph.json"]);
    let eval: serde_json::Value = serde_json::from_str(&eval).unwrap();
    assert_eq!(eval["records"], 5000);
    assert_eq!(eval["policy"].as_array().unwrap().len(), 18);
}

#[test]
fn gen_data_rejects_zero_weight_behavior() {
    let dir = tempfile::tempdir().unwrap();
    let out = neuroloop(dir.path(), &["gen-data", "--layout", "graph", "--behavior", "1,1,1,1,1,1,0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("full_adaptation"));
}

#[test]
fn run_without_calibration_says_how_to_make_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = neuroloop(dir.path(), &["run", "--unpaced", "--port", "0"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("calibration.json") && err.contains("neuroloop calibrate"), "{err}");
}

#[test]
fn synth_then_replay_extracts_features() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--epochs", "4", "--out", "eeg.csv"]);
    let out = ok(dir.path(), &["replay", "--file", "eeg.csv"]);
    let lines: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[3]["epoch_index"], 3);
    assert!(lines[0]["power"]["alpha"].as_f64().unwrap() > 0.0);

    let out = neuroloop(dir.path(), &["replay", "--file", "eeg.csv", "--session", "x.jsonl"]);
    assert!(!out.status.success());
}

#[test]
fn full_run_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for layout in ["graph", "timeline", "distribution"] {
        ok(d, &["gen-data", "--layout", layout, "--n", "2000", "--out", &format!("{layout}.jsonl")]);
        ok(d, &["train", "--data", &format!("{layout}.jsonl"), "--layout", layout, "--out", &format!("{layout}.json")]);
    }
    ok(d, &["calibrate", "--synthetic-epochs", "120", "--out", "calibration.json"]);
    std::fs::write(
        d.join("neuroloop.toml"),
        r#"
[session]
session_id = "cli-run"
sessions_dir = "logs"
questions = [
  { question_id = "a", difficulty = "high", epochs = 3 },
  { question_id = "b", difficulty = "low", epochs = 2 },
]

[session.models]
graph = "graph.json"
timeline = "timeline.json"
distribution = "distribution.json"

[mwl]
calibration = "calibration.json"

[gateway]
port = 0
"#,
    )
    .unwrap();
    let report = ok(d, &["--config", "neuroloop.toml", "run", "--unpaced"]);
    let report: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(report["epochs_published"], 5);
    assert_eq!(report["configs_published"], 5);
    assert_eq!(report["drained"], true);
    assert!(d.join("logs/cli-run.jsonl").exists());

    let out = neuroloop(d, &["--config", "neuroloop.toml", "replay", "--session", "logs/cli-run.jsonl", "--port", "0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("replayed"));
}
