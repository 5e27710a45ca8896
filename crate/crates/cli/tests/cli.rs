use std::fs;
use std::process::{Command, Output};

fn cyclecast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cyclecast")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn churn_writes_identical_dumps_for_one_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = cyclecast(&["churn", "--n", "100", "--m", "2", "--ops", "1000", "--seed", "7", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let da = fs::read_to_string(a.join("overlay.txt")).unwrap();
    assert_eq!(da, fs::read_to_string(b.join("overlay.txt")).unwrap());
    assert!(da.starts_with("100 2\n"));
    assert_eq!(da.lines().count(), 3);
}

#[test]
fn churn_to_stdout_without_out() {
    let o = cyclecast(&["churn", "--n", "5", "--m", "3", "--seed", "1"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("5 3\n"));
}

#[test]
fn removing_the_source_fails_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("script.txt");
    fs::write(&script, "join   # peer 3\njoin\nleave 3\nleave 1\n").unwrap();
    let o = cyclecast(&["churn", "--script", script.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("operation 4"), "{}", stderr(&o));
    assert!(stderr(&o).contains("source"));
}

#[test]
fn stream_six_peers_passes_and_writes_logs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = cyclecast(&[
        "stream",
        "--n",
        "6",
        "--m",
        "2",
        "--k",
        "3",
        "--schedule",
        "1,1,2",
        "--horizon",
        "200",
        "--seed",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    let log = fs::read_to_string(out.join("delivery_log.csv")).unwrap();
    assert!(log.starts_with("peer,chunk_t,color,rx_slot\n"));
    let gen = fs::read_to_string(out.join("generated.csv")).unwrap();
    assert!(gen.starts_with("chunk_t,color\n1,1\n2,2\n4,1\n"));
}

#[test]
fn stream_larger_overlay_with_auto_horizon() {
    let o = cyclecast(&["stream", "--n", "500", "--m", "3", "--k", "4", "--schedule", "1,2,1,3", "--seed", "2"]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("undelivered=0"));
}

#[test]
fn stream_rejects_bad_schedule() {
    let o = cyclecast(&["stream", "--n", "6", "--m", "2", "--k", "3", "--schedule", "1,1,1"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("last scheduling entry"));
}

#[test]
fn stream_over_a_dumped_overlay() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("overlay");
    let o = cyclecast(&["churn", "--n", "30", "--m", "3", "--ops", "60", "--seed", "5", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    let overlay = path.join("overlay.txt");
    let o = cyclecast(&["stream", "--overlay", overlay.to_str().unwrap(), "--k", "5", "--phase", "random", "--seed", "5"]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("N=30 M=3 K=5"));
}

#[test]
fn fgc_exports_trace_and_edges() {
    let dir = tempfile::tempdir().unwrap();
    let o = cyclecast(&["fgc", "--n", "300", "--k", "3", "--seed", "3", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 301);
    let edges = fs::read_to_string(dir.path().join("edges.txt")).unwrap();
    assert!(edges.starts_with("# source=1"));
    assert!(stdout(&o).contains("candidate counts hold=true"));
}

#[test]
fn fgc_rejects_q_with_k() {
    let o = cyclecast(&["fgc", "--n", "10", "--q", "0.5", "--k", "3"]);
    assert!(!o.status.success());
}

#[test]
fn verify_negative_control_is_expected_to_fail() {
    let dir = tempfile::tempdir().unwrap();
    let o = cyclecast(&["verify", "scaling", "--q", "0", "--profile", "smoke", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("expected-fail control"));
    let json = fs::read_to_string(dir.path().join("depth-scaling_q_0.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["params"]["q"], 0.0);
    assert!(dir.path().join("depth-scaling_q_0.samples.csv").exists());
}

#[test]
fn verify_smoke_suites_pass() {
    for suite in ["uniformity", "fgc-equivalence", "expansion", "concentration", "contraction", "diameter"] {
        let o = cyclecast(&["verify", suite, "--profile", "smoke", "--seed", "42"]);
        assert!(o.status.success(), "{suite}: {}{}", stdout(&o), stderr(&o));
    }
}

#[test]
fn verify_is_deterministic() {
    let run = || stdout(&cyclecast(&["verify", "expansion", "--profile", "smoke", "--seed", "11"]));
    assert_eq!(run(), run());
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let o = cyclecast(&["verify", "everything"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("expected one of"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"n": 8, "m": 2, "seed": 3, "ops": 6}"#).unwrap();
    let from_file = cyclecast(&["--config", cfg.to_str().unwrap(), "churn"]);
    assert!(from_file.status.success());
    assert!(stdout(&from_file).starts_with("8 2\n"));
    let flagged = cyclecast(&["--config", cfg.to_str().unwrap(), "churn", "--n", "12", "--ops", "10"]);
    assert!(stdout(&flagged).starts_with("12 2\n"));

    fs::write(&cfg, r#"{"nn": 8}"#).unwrap();
    let bad = cyclecast(&["--config", cfg.to_str().unwrap(), "churn", "--n", "5"]);
    assert!(!bad.status.success());
    assert!(stderr(&bad).contains("unknown field"));
}
