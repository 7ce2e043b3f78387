use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bgcusum::model::load_partition;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn bgcusum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bgcusum")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn calibrate_analytic_quartiles() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.json");
    let o = bgcusum(&["calibrate", "--model", path_str(&data("std_normal.json")), "--n", "4", "--out", path_str(&out)]);
    assert!(o.status.success());
    let p = load_partition(&out).unwrap();
    for (z, e) in p.boundaries().iter().zip([-0.67449, 0.0, 0.67449]) {
        assert!((z - e).abs() < 1e-5);
    }
}

#[test]
fn calibrate_order_statistics() {
    let o = bgcusum(&["calibrate", "--input", path_str(&data("one_to_hundred.txt")), "--n", "4"]);
    assert!(o.status.success());
    let art: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(art["boundaries"], serde_json::json!([25.0, 50.0, 75.0]));
    let o = bgcusum(&["calibrate", "--input", path_str(&data("one_to_hundred.txt")), "--n", "1"]);
    let art: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(art["boundaries"], serde_json::json!([]));
}

#[test]
fn calibrate_too_few_samples_is_data_error() {
    let o = bgcusum(&["calibrate", "--input", path_str(&data("one_to_hundred.txt")), "--n", "101"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bgcusum(&["calibrate", "--input", "/nonexistent/file", "--n", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn calibrated_artifact_drives_detect() {
    let dir = tempfile::tempdir().unwrap();
    let art = dir.path().join("p.json");
    let o = bgcusum(&["calibrate", "--model", path_str(&data("std_normal.json")), "--n", "16", "--out", path_str(&art)]);
    assert!(o.status.success());
    let trace = dir.path().join("trace.csv");
    let o = bgcusum(&[
        "detect", "--partition", path_str(&art), "--input", path_str(&data("golden_stream.txt")),
        "--b", "3", "--trace", "--out", path_str(&trace),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(&trace).unwrap(), std::fs::read(data("golden_trace.csv")).unwrap());
}

#[test]
fn golden_detect_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let o = bgcusum(&[
        "detect", "--model", path_str(&data("std_normal.json")), "--n", "16",
        "--input", path_str(&data("golden_stream.txt")), "--b", "3", "--trace", "--out", path_str(&trace),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("tau: 313\n"));
    assert_eq!(std::fs::read(&trace).unwrap(), std::fs::read(data("golden_trace.csv")).unwrap());
}

#[test]
fn detect_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "").unwrap();
    let model = data("std_normal.json");
    let o = bgcusum(&["detect", "--model", path_str(&model), "--n", "4", "--input", path_str(&empty), "--b", "1"]);
    assert_eq!(o.status.code(), Some(10));

    let o = bgcusum(&["detect", "--model", path_str(&model), "--n", "4", "--input", path_str(&data("golden_stream.txt")), "--b", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("tau: 1\n"));

    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "0.1\noops\n0.2\n").unwrap();
    let o = bgcusum(&["detect", "--model", path_str(&model), "--n", "4", "--input", path_str(&bad), "--b", "50"]);
    assert_eq!(o.status.code(), Some(10));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert!(stdout(&o).contains("tau: 2\n"));
    let o = bgcusum(&["detect", "--model", path_str(&model), "--n", "4", "--input", path_str(&bad), "--b", "50", "--strict"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn detect_csv_column_and_json_summary() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let mut text = String::from("time,value\n");
    for (i, line) in std::fs::read_to_string(data("golden_stream.txt")).unwrap().lines().enumerate() {
        text += &format!("{i},{line}\n");
    }
    std::fs::write(&csv, text).unwrap();
    let summary = dir.path().join("s.json");
    let o = bgcusum(&[
        "detect", "--model", path_str(&data("std_normal.json")), "--n", "16", "--input", path_str(&csv),
        "--column", "value", "--b", "3", "--out", path_str(&summary),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(summary).unwrap()).unwrap();
    assert_eq!(v["tau"], 313);
    assert_eq!(v["lambda"], 301);
}

#[test]
fn choose_n_and_distinguishability() {
    let f = data("std_normal.json");
    let o = bgcusum(&["choose-n", "--model", path_str(&f), "--k", "2", "--eps", "0.5", "--c", "1.9", "--xi", "4"]);
    assert_eq!(stdout(&o), "25\n");
    let o = bgcusum(&["check-distinguishable", "--model", path_str(&f), "--post-model", path_str(&data("narrow_normal.json"))]);
    assert_eq!(stdout(&o), "3\n");
    let o = bgcusum(&[
        "check-distinguishable", "--model", path_str(&f), "--post-model", path_str(&data("narrow_normal.json")), "--n", "2",
    ]);
    assert_eq!(stdout(&o), "false\n");
}

#[test]
fn usage_errors() {
    assert_eq!(bgcusum(&["bench", "--experiment", "smoke", "--trials", "0"]).status.code(), Some(1));
    assert_eq!(bgcusum(&["bench", "--experiment", "nope"]).status.code(), Some(1));
    assert_eq!(bgcusum(&["detect", "--b", "1", "--bogus"]).status.code(), Some(1));
    assert_eq!(bgcusum(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(bgcusum(&["detect", "--b", "1", "--trace"]).status.code(), Some(1));
}

#[test]
fn help_lists_flags() {
    for (cmd, flags) in [
        ("calibrate", &["--model", "--input", "--column", "--n", "--out", "--strict", "--config"][..]),
        ("detect", &["--partition", "--model", "--input", "--column", "--r", "--b", "--trace", "--strict", "--out"][..]),
        ("bench", &["--trials", "--cap", "--nu", "--seed", "--target-arl", "--workers", "--out", "--timing"][..]),
    ] {
        let o = bgcusum(&[cmd, "--help"]);
        assert!(o.status.success());
        let text = stdout(&o);
        for flag in flags {
            assert!(text.contains(flag), "{cmd} --help lacks {flag}");
        }
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.json");
    std::fs::write(
        &cfg,
        r#"{"seed": 4, "trials": 50, "experiments": [
            {"id": "cfg", "kind": "arl_direct", "n": 4, "b": 0.5}
        ]}"#,
    )
    .unwrap();
    let o = bgcusum(&["bench", "--config", path_str(&cfg), "--trials", "20"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("cfg,arl_direct,"));
    assert_eq!(row.split(',').nth(6), Some("20"));
}

#[test]
fn bench_csv_is_independent_of_workers() {
    let dir = tempfile::tempdir().unwrap();
    let outs: Vec<Vec<u8>> = ["1", "3", "8"]
        .iter()
        .map(|w| {
            let out = dir.path().join(format!("w{w}.csv"));
            let o = bgcusum(&["bench", "--experiment", "smoke", "--seed", "11", "--workers", w, "--out", path_str(&out)]);
            assert!(o.status.success());
            std::fs::read(out).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[0], outs[2]);
    let text = String::from_utf8(outs[0].clone()).unwrap();
    assert!(text.starts_with("experiment_id,metric,estimate,se,ci_lo,ci_hi,trials,truncated,seconds\n"));
}
