use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgapproach"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr_line(out: &Output) -> String {
    let text = String::from_utf8_lossy(&out.stderr).to_string();
    assert_eq!(text.trim_end().lines().count(), 1, "diagnostic should be one line: {text:?}");
    text
}

#[test]
fn validate_good_and_bad_models() {
    let ok = run(&["validate", "--model", path(&fixture("fix_chain.json"))]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("irreducibility: pass"));

    let bad = run(&["validate", "--model", path(&fixture("bad_model.json"))]);
    assert_eq!(bad.status.code(), Some(2));
    let stdout = String::from_utf8_lossy(&bad.stdout);
    assert!(stdout.contains("(0,0,0) sums to 0.7"));
    assert!(stdout.contains("cost out of [-1,1]"));
    stderr_line(&bad);
}

#[test]
fn solve_prints_value() {
    let out = run(&["solve", "--model", path(&fixture("fix_chain.json")), "--lambda", "1,0"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 0.1).abs() < 1e-9);
    assert_eq!(v["leader_policy"], serde_json::json!([1, 0]));

    // Unicode minus, unnormalized input.
    let out = run(&["solve", "--model", path(&fixture("fix_chain.json")), "--lambda", "0.7,\u{2212}0.7"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() + 0.8 / 2f64.sqrt()).abs() < 1e-9);
}

#[test]
fn solve_rejects_bad_lambda() {
    for lambda in ["0,0", "1,2,3", "abc"] {
        let out = run(&["solve", "--model", path(&fixture("fix_chain.json")), "--lambda", lambda]);
        assert_eq!(out.status.code(), Some(2), "lambda {lambda}");
        stderr_line(&out);
    }
}

#[test]
fn check_emits_certificates() {
    let out = run(&[
        "check",
        "--model",
        path(&fixture("fix_match.json")),
        "--target",
        path(&fixture("box_left.json")),
        "--directions",
        "720",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["approachable"], false);
    assert_eq!(v["counterexample"], serde_json::json!([1.0, 0.0]));

    let out = run(&[
        "check",
        "--model",
        path(&fixture("fix_chain.json")),
        "--target",
        path(&fixture("two_balls.json")),
        "--points",
        "64",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["points_checked"], 64);
}

#[test]
fn check_argument_errors() {
    let both = run(&[
        "check", "--model", "m", "--target", "t", "--directions", "3", "--points", "3",
    ]);
    assert_eq!(both.status.code(), Some(2));
    stderr_line(&both);

    let dims = run(&[
        "check",
        "--model",
        path(&fixture("fix_chain.json")),
        "--target",
        path(&fixture("two_balls.json")),
        "--directions",
        "8",
    ]);
    assert_eq!(dims.status.code(), Some(2));
}

#[test]
fn missing_files_exit_2() {
    for args in [
        vec!["validate", "--model", "/nonexistent/m.json"],
        vec!["run", "--config", "/nonexistent/c.json"],
        vec!["report", "--in", "/nonexistent", "--out", "/tmp/x.svg"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(stderr_line(&out).starts_with("error: "));
    }
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let cfg = format!(
        r#"{{
  "model": "{}",
  "target": {{ "type": "ball", "center": [0.5, 0.5], "radius": 0.2 }},
  "leader": "exact",
  "adversary": {{ "type": "worst_case" }},
  "steps": 3000,
  "seeds": [1, 2],
  "output_dir": "out"{extra}
}}"#,
        fixture("fix_chain.json").display()
    );
    let p = dir.join("cfg.json");
    std::fs::write(&p, cfg).unwrap();
    p
}

#[test]
fn run_learn_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#", "record_stride": { "type": "every", "every": 10 }"#);

    let out = run(&["run", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let outdir = dir.path().join("out");
    for f in ["traj_seed1.csv", "traj_seed2.csv", "traj_seed1.meta.json", "aggregate.json"] {
        assert!(outdir.join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(outdir.join("traj_seed1.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with(','), "exact runs leave eps empty");

    let out = run(&["learn", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(outdir.join("traj_seed1.csv")).unwrap();
    assert!(!csv.lines().nth(1).unwrap().ends_with(','), "learner runs record eps");

    let svg = dir.path().join("chart.svg");
    let out = run(&["report", "--in", path(&outdir), "--out", path(&svg)]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<polyline").count(), 2);
}

#[test]
fn runtime_failure_exits_3_and_keeps_partial_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace(r#"{ "type": "worst_case" }"#, r#"{ "type": "scripted", "actions": [0, 0, 0] }"#);
    std::fs::write(&cfg, text).unwrap();
    let out = run(&["run", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_line(&out).contains("scripted adversary exhausted"));
    let agg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/aggregate.json")).unwrap()).unwrap();
    assert_eq!(agg["failures"].as_array().unwrap().len(), 2);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#", "stepz": 5"#);
    let out = run(&["run", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).contains("stepz"));
}

#[test]
fn help_exits_0() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["validate", "solve", "check", "run", "learn", "report"] {
        assert!(text.contains(cmd));
    }
}
