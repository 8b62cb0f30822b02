use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::NamedTempFile;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quivercap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn number(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| v.to_string().parse().unwrap())
}

fn temp_datum(text: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

#[test]
fn kronecker_capacity_is_four() {
    let out = run(&["capacity", fixture("kronecker.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["status"], "converged");
    assert!((number(&r["capacity"]) - 4.0).abs() <= 1e-12);
    assert!(r["config"].is_object() && r["version"].is_string());
}

#[test]
fn zero_datum_is_not_semistable() {
    let out = run(&["semistable", fixture("zero.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["decision"], "no");
    assert_eq!(r["capacity"], "0");
    assert!(r["witness"].is_object());
}

#[test]
fn hoelder_bl_is_one() {
    let out = run(&["bl", fixture("hoelder.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert!((number(&r["bl"]) - 1.0).abs() <= 1e-12);
    assert_eq!(r["geometric_bl"], true);
}

#[test]
fn factorize_splits_the_diagonal() {
    let out = run(&["factorize", fixture("block_triangular.json").to_str().unwrap(), "--block-dims", "v=1,w=1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("3.6000000000000000e+1"), "{text}");
}

#[test]
fn reports_are_byte_identical() {
    let file = fixture("block_triangular.json");
    for cmd in ["capacity", "scale", "extremisers", "oracle"] {
        let args = [cmd, file.to_str().unwrap(), "--seed", "7"];
        assert_eq!(run(&args).stdout, run(&args).stdout, "{cmd}");
    }
}

#[test]
fn report_numbers_keep_seventeen_digits() {
    let out = run(&["capacity", fixture("block_triangular.json").to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    let r: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&r).unwrap() + "\n", text);
    let raw = r["character_log"].to_string();
    let mantissa = raw.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{raw}");
}

#[test]
fn text_format_lists_keys() {
    let out = run(&["--format", "text", "capacity", fixture("kronecker.json").to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("capacity: ")), "{text}");
}

#[test]
fn wrong_row_count_is_a_usage_error_naming_the_arrow() {
    let f = temp_datum(
        r#"{"quiver": {"sources": ["v"], "sinks": ["w"], "arrows": [{"id": "edge", "tail": "v", "head": "w"}]},
            "dims": {"v": 1, "w": 2}, "weight": {"v": 2, "w": -1}, "matrices": {"edge": [[1.0]]}}"#,
    );
    let out = run(&["capacity", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("edge"));
    assert!(out.stdout.is_empty());
}

#[test]
fn unbalanced_weight_fails_validation() {
    let f = temp_datum(
        r#"{"quiver": {"sources": ["v"], "sinks": ["w"], "arrows": [{"id": "a", "tail": "v", "head": "w"}]},
            "dims": {"v": 1, "w": 1}, "weight": {"v": 1, "w": -2}, "matrices": {"a": [[1.0]]}}"#,
    );
    let path = f.path().to_str().unwrap();
    let out = run(&["validate", path]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["valid"], false);
    assert_eq!(run(&["capacity", path]).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["capacity"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["capacity", "/nonexistent/datum.json"]).status.code(), Some(1));
    assert_eq!(run(&["--tol-ds", "-1", "capacity", fixture("kronecker.json").to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn exhausted_budget_is_indeterminate() {
    // the infimum 9 is only approached, so two rounds cannot settle it
    let f = temp_datum(
        r#"{"quiver": {"sources": ["v1", "v2"], "sinks": ["w1", "w2"],
                       "arrows": [{"id": "a", "tail": "v1", "head": "w1"}, {"id": "b", "tail": "v2", "head": "w1"},
                                  {"id": "c", "tail": "v2", "head": "w2"}]},
            "dims": {"v1": 1, "v2": 1, "w1": 1, "w2": 1}, "weight": {"v1": 1, "v2": 1, "w1": -1, "w2": -1},
            "matrices": {"a": [[1.0]], "b": [[2.0]], "c": [[3.0]]}}"#,
    );
    let out = run(&["--max-iter", "2", "--positivity-threshold", "10", "capacity", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["status"], "indeterminate");
}
