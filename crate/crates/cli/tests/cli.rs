use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use matweight::fields::{read_field, write_field};
use matweight::Field;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matweight"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn rows(out: &Output) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(&out.stdout[..])
        .records()
        .map(|r| r.unwrap())
        .collect()
}

const IDENTITY: &str = r#"{"kind": "identity", "n": 2, "d": 1, "depth": 5}"#;

#[test]
fn verify_default_manifest() {
    let out = run(&["verify", "--seeds", "3"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut reader = csv::Reader::from_reader(&out.stdout[..]);
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "quantity",
            "p",
            "epsilon",
            "grid",
            "supremum",
            "witness-cube",
            "a2W",
            "a2U",
            "seed"
        ]
    );
    let mut quantities: Vec<String> = rows(&out).iter().map(|r| r[0].to_string()).collect();
    quantities.sort();
    quantities.dedup();
    assert!(quantities.len() >= 7, "{quantities:?}");
}

#[test]
fn output_is_deterministic() {
    let a = run(&["verify", "--seeds", "2", "--p", "2,3"]);
    let b = run(&["verify", "--seeds", "2", "--p", "2,3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn gen_identity_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let id = write(dir.path(), "id.json", IDENTITY);
    let out = dir.path().join("id.bin");
    assert!(run(&["gen", "--spec", &id, "--out", out.to_str().unwrap()])
        .status
        .success());
    let f: Field<f64> = read_field(&fs::read(&out).unwrap()[..]).unwrap();
    assert!(f
        .leaves()
        .iter()
        .all(|m| *m == nalgebra::DMatrix::identity(2, 2)));

    let power = write(
        dir.path(),
        "pow.json",
        r#"{"kind": "power", "n": 2, "d": 1, "depth": 6, "alphas": [0.5, -0.3]}"#,
    );
    let out = dir.path().join("pow.bin");
    assert!(
        run(&["gen", "--spec", &power, "--out", out.to_str().unwrap()])
            .status
            .success()
    );
    let bytes = fs::read(&out).unwrap();
    let f: Field<f64> = read_field(&bytes[..]).unwrap();
    let mut again = Vec::new();
    write_field(&f, &mut again).unwrap();
    assert_eq!(bytes, again);
}

#[test]
fn bad_spec_fails() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"kind\": ");
    let out = run(&[
        "gen",
        "--spec",
        &bad,
        "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn ap_identity_and_usage() {
    let dir = tempfile::tempdir().unwrap();
    let id = write(dir.path(), "id.json", IDENTITY);
    let out = run(&["ap", "--w", &id, "--p", "3"]);
    assert!(out.status.success());
    let r = rows(&out);
    assert!((r[0][4].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
    let out = run(&["ap", "--w", &id, "--p", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stopping_identity_pair() {
    let dir = tempfile::tempdir().unwrap();
    let id = write(dir.path(), "id.json", IDENTITY);
    let out = run(&["stopping", "--w", &id, "--u", &id]);
    assert!(out.status.success());
    for r in rows(&out)
        .iter()
        .filter(|r| r[0].starts_with("stopped_fraction"))
    {
        assert_eq!(r[4].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn duality_zero_phi() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(
        dir.path(),
        "m.json",
        r#"{"ensemble": {"n": 2, "d": 1, "depth": 5}, "seeds": [0, 1, 2], "phi": "zero"}"#,
    );
    let out = run(&["duality", "--spec", &m]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let ratios: Vec<f64> = rows(&out)
        .iter()
        .filter(|r| &r[0] == "duality_ratio")
        .map(|r| r[4].parse().unwrap())
        .collect();
    assert_eq!(ratios.len(), 3);
    assert!(ratios.iter().all(|&x| x == 0.0));
}

#[test]
fn verify_constant_symbol_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(
        dir.path(),
        "m.json",
        r#"{"ensemble": {"n": 2, "d": 1, "depth": 5}, "seeds": [3], "p": [2.0, 3.0], "symbol": "constant"}"#,
    );
    let out = run(&["verify", "--spec", &m]);
    assert!(out.status.success());
    assert!(rows(&out)
        .iter()
        .all(|r| r[4].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn jn_and_thm12_run() {
    let out = run(&["jn", "--seeds", "2", "--depth", "5", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!v["rows"].as_array().unwrap().is_empty());

    let dir = tempfile::tempdir().unwrap();
    let lambda = write(
        dir.path(),
        "l.json",
        r#"{"kind": "random_log_spd", "n": 2, "d": 1, "depth": 5, "seed": 4, "amplitude": 0.5}"#,
    );
    let u = write(
        dir.path(),
        "u.json",
        r#"{"kind": "rotation", "n": 2, "d": 1, "depth": 5, "theta0": 0.3, "theta_slope": [2.0], "diagonal": {"kind": "constant", "values": [1.0, 3.0]}}"#,
    );
    let out = run(&["thm12", "--lambda", &lambda, "--u", &u, "--p", "2,3"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(rows(&out).iter().any(|r| &r[0] == "buckley"));
}

#[test]
fn bmo_subset_and_shifted_grids() {
    let dir = tempfile::tempdir().unwrap();
    let b = write(
        dir.path(),
        "b.json",
        r#"{"kind": "random_log_spd", "n": 2, "d": 1, "depth": 6, "seed": 9, "amplitude": 1.0}"#,
    );
    let w = write(
        dir.path(),
        "w.json",
        r#"{"kind": "random_log_spd", "n": 2, "d": 1, "depth": 6, "seed": 2, "amplitude": 0.5}"#,
    );
    let out = run(&[
        "bmo",
        "--b",
        &b,
        "--w",
        &w,
        "--u",
        &w,
        "--which",
        "condition_b,carleson",
        "--grids",
        "1,2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = rows(&out);
    assert_eq!(r.len(), 4);
    assert!(r.iter().all(|r| r[4].parse::<f64>().unwrap() > 0.0));
    assert!(
        !run(&["bmo", "--b", &b, "--w", &w, "--u", &w, "--which", "nonsense"])
            .status
            .success()
    );
}
