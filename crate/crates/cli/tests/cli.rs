use std::path::{Path, PathBuf};
use std::process::Command;

use proptest::prelude::*;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lipdiff"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(path: &Path, extra: &[&str]) -> (i32, Value) {
    let out = bin().arg("run").arg(path).args(extra).output().unwrap();
    let json = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap(), json)
}

fn without_wall_time(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("wall_time_ms");
    v
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(format!("{name}.json"));
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn exit_codes_of_bundled_scenarios() {
    let expected = [
        ("cube-certify", 2, Some("jacobian-singular")),
        ("affine-certify", 0, None),
        ("exp-log-certify", 0, None),
        ("cube-density", 2, Some("bound-check-failed")),
        ("cube-root-lipschitz", 2, Some("blowup")),
        ("karcher-mean", 0, None),
        ("tsinlog-derived-set", 0, None),
        ("tsinlog-chain-rule", 0, None),
    ];
    for (name, code, reason) in expected {
        let (got, json) = run(&scenarios().join(format!("{name}.json")), &[]);
        assert_eq!(got, code, "{name}: {json}");
        assert_eq!(json["reason"].as_str(), reason, "{name}");
        assert_eq!(json["scenario"]["name"], name);
        assert_eq!(json["toolkit_version"], env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn karcher_mean_residual_is_within_tolerance() {
    let (code, json) = run(&scenarios().join("karcher-mean.json"), &[]);
    assert_eq!(code, 0);
    assert!(json["report"]["final_residual"].as_f64().unwrap() <= 1e-10);
    assert_eq!(json["report"]["operands"], 3);
}

#[test]
fn reports_are_deterministic_across_runs_and_threads() {
    let path = scenarios().join("shear-certify.json");
    let one = Command::new(env!("CARGO_BIN_EXE_lipdiff"))
        .env("LIPDIFF_THREADS", "1")
        .arg("run")
        .arg(&path)
        .output()
        .unwrap();
    let many = bin().env("LIPDIFF_THREADS", "4").arg("run").arg(&path).output().unwrap();
    let a: Value = serde_json::from_slice(&one.stdout).unwrap();
    let b: Value = serde_json::from_slice(&many.stdout).unwrap();
    assert_eq!(without_wall_time(a), without_wall_time(b));
}

#[test]
fn profiles_follow_the_report_schema() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for (name, count) in [("cube-certify", 3), ("karcher-mean", 1), ("tsinlog-derived-set", 1)] {
        run(&scenarios().join(format!("{name}.json")), &["--profiles", d]);
        let files: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().starts_with(&format!("{name}.")))
            .collect();
        assert_eq!(files.len(), count, "{name}");
    }
    let text = std::fs::read_to_string(dir.path().join("tsinlog-derived-set.quotients.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,q0");
    for line in lines {
        let q: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((-1.0..=1.0).contains(&q));
    }
    let trace = std::fs::read_to_string(dir.path().join("karcher-mean.karcher-trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,residual\n"));
}

#[test]
fn out_flag_writes_the_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let (code, stdout) = run(&scenarios().join("exp-log-certify.json"), &["--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(stdout, Value::Null);
    let written: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(written["verdict"], "certified");
}

#[test]
fn malformed_scenarios_exit_with_structured_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(dir.path(), "broken", "{\n  \"schema\": \"lipdiff-scenario/1\",\n  \"name\": oops\n}\n");
    let (code, json) = run(&p, &[]);
    assert_eq!(code, 1);
    assert_eq!(json["error"]["kind"], "parse-error");
    assert_eq!(json["error"]["line"], 3);

    let p = write_scenario(
        dir.path(),
        "no-seed",
        r#"{"schema": "lipdiff-scenario/1", "name": "x", "pipeline": "certify", "map": {"name": "cube"}, "x": [0.0]}"#,
    );
    let (code, json) = run(&p, &[]);
    assert_eq!(code, 1);
    assert!(json["error"]["message"].as_str().unwrap().contains("seed"));

    let p = write_scenario(
        dir.path(),
        "bad-tol",
        r#"{"schema": "lipdiff-scenario/1", "name": "x", "pipeline": "certify", "seed": 1,
            "map": {"name": "cube"}, "x": [0.0], "tolerances": {"identity": 0}}"#,
    );
    let (code, json) = run(&p, &[]);
    assert_eq!(code, 1);
    assert_eq!(json["error"]["field"], "tolerances.identity");

    let p = write_scenario(
        dir.path(),
        "outside",
        r#"{"schema": "lipdiff-scenario/1", "name": "x", "pipeline": "certify", "seed": 1,
            "map": {"name": "cube"}, "x": [1.5]}"#,
    );
    let (code, json) = run(&p, &[]);
    assert_eq!(code, 1);
    assert_eq!(json["error"]["kind"], "domain-violation");
}

#[test]
fn catalog_lists_required_maps() {
    let out = bin().arg("catalog").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["identity-<n>", "cube", "exp-log", "affine", "tsinlog", "karcher-pair"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn exit_code_contract(seed in 0u64..1000, a in 0.5..4.0f64, b in 0.5..4.0f64, x in -0.5..0.5f64) {
        let dir = tempfile::tempdir().unwrap();
        let affine = write_scenario(dir.path(), "affine", &format!(
            r#"{{"schema": "lipdiff-scenario/1", "name": "affine", "pipeline": "certify", "seed": {seed},
                "map": {{"name": "affine", "matrix": [[{a}, 0.0], [0.0, {b}]]}}, "x": [{x}, {x}]}}"#));
        prop_assert_eq!(run(&affine, &[]).0, 0);
        let cube = write_scenario(dir.path(), "cube", &format!(
            r#"{{"schema": "lipdiff-scenario/1", "name": "cube", "pipeline": "certify", "seed": {seed},
                "map": {{"name": "cube"}}, "x": [0.0]}}"#));
        prop_assert_eq!(run(&cube, &[]).0, 2);
        let root = write_scenario(dir.path(), "root", &format!(
            r#"{{"schema": "lipdiff-scenario/1", "name": "root", "pipeline": "lipschitz", "seed": {seed},
                "map": {{"name": "cube", "side": "f"}}, "x": [0.0], "radii": [1e-2, 1e-4, 1e-6]}}"#));
        prop_assert_eq!(run(&root, &[]).0, 2);
    }
}
