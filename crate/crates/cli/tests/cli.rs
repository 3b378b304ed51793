use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

const NIL2: &str = r#"{"n":2,"re":[[0,2],[0,0]]}"#;
const NIL1: &str = r#"{"n":2,"re":[[0,1],[0,0]]}"#;
const NIL3: &str = r#"{"n":2,"re":[[0,3],[0,0]]}"#;
const TANGENT: &str =
    r#"{"blocks":[{"n":1,"re":[[1]],"im":[[1]]},{"n":1,"re":[[1]],"im":[[-1]]},{"n":2,"re":[[0,2],[0,0]]}]}"#;
const DISKS: &str = r#"{"blocks":[{"n":2,"re":[[0,2],[0,0]]},{"n":2,"re":[[3,2],[0,3]]}]}"#;

struct Run {
    code: i32,
    stdout: String,
}

fn omaxkit(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_omaxkit")).args(args).output().expect("binary runs");
    Run { code: out.status.code().unwrap_or(-1), stdout: String::from_utf8(out.stdout).unwrap() }
}

fn file(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn numrange_nilpotent_is_a_circle() {
    let dir = tempfile::tempdir().unwrap();
    let a = file(dir.path(), "a.json", NIL2);
    let r = omaxkit(&["numrange", "-i", s(&a)]);
    assert_eq!(r.code, 0);
    let mut lines = r.stdout.lines();
    assert_eq!(lines.next(), Some("theta,support_value,point_re,point_im,multiplicity"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 720);
    for row in &rows {
        // W of [[0,2],[0,0]] is the unit disk.
        assert!((row[1] - 1.0).abs() < 1e-10);
        assert!((row[2].hypot(row[3]) - 1.0).abs() < 1e-10);
        assert!((row[2] - row[0].cos()).abs() < 1e-8);
    }
}

#[test]
fn numrange_scalar_is_one_point() {
    let dir = tempfile::tempdir().unwrap();
    let a = file(dir.path(), "a.json", r#"{"n":1,"re":[[3]]}"#);
    let r = omaxkit(&["numrange", "-i", s(&a)]);
    assert_eq!(r.code, 0);
    assert_eq!(r.stdout.lines().count(), 2);
    assert!(r.stdout.lines().nth(1).unwrap().starts_with("0,3,3,0"));
}

#[test]
fn numrange_tangent_fixture_svg_has_three_flat_segments() {
    let dir = tempfile::tempdir().unwrap();
    let a = file(dir.path(), "a.json", TANGENT);
    let out = dir.path().join("w.svg");
    let r = omaxkit(&["numrange", "-i", s(&a), "--format", "svg", "--out", s(&out)]);
    assert_eq!(r.code, 0);
    let svg = std::fs::read_to_string(&out).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("class=\"flat\"").count(), 3);
    assert_eq!(svg.matches("class=\"boundary\"").count(), 1);
}

#[test]
fn numrange_json_lists_flat_portions() {
    let dir = tempfile::tempdir().unwrap();
    let a = file(dir.path(), "a.json", TANGENT);
    let r = omaxkit(&["numrange", "-i", s(&a), "--format", "json", "--samples", "360"]);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["samples"].as_array().unwrap().len(), 360);
    assert_eq!(v["flat_portions"].as_array().unwrap().len(), 3);
}

#[test]
fn include_exit_codes_and_gap() {
    let dir = tempfile::tempdir().unwrap();
    let a = file(dir.path(), "a.json", NIL2);
    let b1 = file(dir.path(), "b1.json", NIL1);
    let b3 = file(dir.path(), "b3.json", NIL3);
    assert_eq!(omaxkit(&["include", "-A", s(&a), "-B", s(&b1)]).code, 0);
    assert_eq!(omaxkit(&["include", "-A", s(&a), "-B", s(&a)]).code, 0);
    let r = omaxkit(&["include", "-A", s(&a), "-B", s(&b3)]);
    assert_eq!(r.code, 1);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["verdict"], Value::Bool(false));
    // Radii 1.5 and 1.
    assert!((v["worst_gap"].as_f64().unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn include_rejects_mismatched_tuples() {
    let dir = tempfile::tempdir().unwrap();
    let a = file(dir.path(), "a.json", NIL2);
    let t = file(dir.path(), "t.json", r#"{"tuple":[{"n":1,"re":[[0]]},{"n":1,"re":[[1]]},{"n":1,"re":[[2]]}]}"#);
    assert_eq!(omaxkit(&["include", "-A", s(&a), "-B", s(&t)]).code, 3);
}

#[test]
fn dilate_disk_in_disk_writes_verifiable_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let a = file(dir.path(), "a.json", NIL2);
    let b = file(dir.path(), "b.json", r#"{"n":2,"re":[[0.1,0.5],[0.3,0]],"im":[[0,0.2],[0,-0.1]]}"#);
    let out = dir.path().join("cert.json");
    let r = omaxkit(&["dilate", "-A", s(&a), "-B", s(&b), "--out", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["status"], "Feasible");
    assert_eq!(v["certificate"]["kind"], "dilation");
    assert_eq!(omaxkit(&["verify", "-i", s(&out)]).code, 0);
}

#[test]
fn dilate_self_and_outside() {
    let dir = tempfile::tempdir().unwrap();
    let a = file(dir.path(), "a.json", NIL2);
    let b3 = file(dir.path(), "b3.json", NIL3);
    assert_eq!(omaxkit(&["dilate", "-A", s(&a), "-B", s(&a)]).code, 0);
    let r = omaxkit(&["dilate", "-A", s(&a), "-B", s(&b3)]);
    assert_eq!(r.code, 1);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["certificate"]["kind"], "dual_witness");
}

#[test]
fn dilate_case_one_counterexample_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let a = file(dir.path(), "a.json", DISKS);
    let out = dir.path().join("ce.json");
    assert_eq!(omaxkit(&["counterexample", "-i", s(&a), "--out", s(&out)]).code, 0);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let b = file(dir.path(), "b.json", &v["b"].to_string());
    let dense = file(dir.path(), "dense.json", &format!(r#"{{"blocks":{}}}"#, v["certificate"]["a"]));
    let r = omaxkit(&["dilate", "-A", s(&dense), "-B", s(&b)]);
    assert_eq!(r.code, 1, "{}", r.stdout);
}

#[test]
fn classify_examples() {
    let dir = tempfile::tempdir().unwrap();
    let tangent = file(dir.path(), "r.json", TANGENT);
    let r = omaxkit(&["classify", "-i", s(&tangent)]);
    assert_eq!(r.code, 0);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["verdict"]["status"], "OMAX");
    assert_eq!(v["verdict"]["rule"], "d.3");

    let single = file(dir.path(), "s.json", r#"{"blocks":[{"n":2,"re":[[1,2],[0,-1]]}]}"#);
    let r = omaxkit(&["classify", "-i", s(&single)]);
    assert_eq!(r.code, 0);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["verdict"]["rule"], "d.1");

    let disks = file(dir.path(), "d.json", DISKS);
    let r = omaxkit(&["classify", "-i", s(&disks)]);
    assert_eq!(r.code, 1);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["verdict"]["status"], "NotOMAX");
    assert_eq!(v["certificate"]["kind"], "counterexample");
}

#[test]
fn classify_rejects_large_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let a = file(dir.path(), "a.json", r#"{"blocks":[{"n":3,"re":[[0,1,0],[0,0,1],[0,0,0]]}]}"#);
    assert_eq!(omaxkit(&["classify", "-i", s(&a)]).code, 3);
}

#[test]
fn counterexample_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let tangent = file(dir.path(), "r.json", TANGENT);
    assert_eq!(omaxkit(&["counterexample", "-i", s(&tangent)]).code, 1);
    let bad = file(dir.path(), "bad.json", r#"{"blocks":[1,2"#);
    assert_eq!(omaxkit(&["counterexample", "-i", s(&bad)]).code, 3);
    let missing = dir.path().join("missing.json");
    assert_eq!(omaxkit(&["counterexample", "-i", s(&missing)]).code, 3);
    let disks = file(dir.path(), "d.json", DISKS);
    let r = omaxkit(&["counterexample", "-i", s(&disks)]);
    assert_eq!(r.code, 0);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["rule"], "case1");
    assert!(v["inclusion_margin"].as_f64().unwrap() >= 1e-8);
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let disks = file(dir.path(), "d.json", DISKS);
    let a = file(dir.path(), "a.json", NIL2);
    let b = file(dir.path(), "b.json", NIL3);
    for args in [
        vec!["classify", "-i", s(&disks), "--seed", "7"],
        vec!["counterexample", "-i", s(&disks)],
        vec!["dilate", "-A", s(&a), "-B", s(&b)],
        vec!["numrange", "-i", s(&disks), "--format", "svg"],
    ] {
        let x = omaxkit(&args);
        let y = omaxkit(&args);
        assert_eq!(x.stdout, y.stdout, "{args:?}");
        assert_eq!(x.code, y.code);
    }
}

#[test]
fn verify_flags_tampered_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let disks = file(dir.path(), "d.json", DISKS);
    let out = dir.path().join("c.json");
    assert_eq!(omaxkit(&["classify", "-i", s(&disks), "--out", s(&out)]).code, 1);
    assert_eq!(omaxkit(&["verify", "-i", s(&out)]).code, 0);

    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    // Scaling B up pushes W(B) outside W(A).
    let re = v["certificate"]["b"]["re"].as_array_mut().unwrap();
    for row in re.iter_mut() {
        for x in row.as_array_mut().unwrap() {
            *x = Value::from(x.as_f64().unwrap() * 3.0);
        }
    }
    let tampered = file(dir.path(), "t.json", &v.to_string());
    assert_eq!(omaxkit(&["verify", "-i", s(&out), "-i", s(&tampered)]).code, 1);
    let junk = file(dir.path(), "j.json", "{}");
    assert_eq!(omaxkit(&["verify", "-i", s(&junk)]).code, 3);
}

#[test]
fn bad_tolerance_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let a = file(dir.path(), "a.json", NIL2);
    assert_eq!(omaxkit(&["numrange", "-i", s(&a), "--tol-psd", "-1"]).code, 3);
    assert_eq!(omaxkit(&["numrange"]).code, 3);
}
