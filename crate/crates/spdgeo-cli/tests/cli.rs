//! End-to-end tests of the `spdgeo` binary: JSON contracts, exit codes,
//! and byte-level determinism.

use std::path::Path;
use std::process::{Command, Output};

use spdgeo::grassmann::{example_plane_wp_prime, phi};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spdgeo"))
}

fn write_matrix(path: &Path, rows: &[Vec<f64>]) {
    let text = serde_json::to_string(rows).unwrap();
    std::fs::write(path, text).unwrap();
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is valid JSON")
}

#[test]
fn dsr_zero_on_equal_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.json");
    write_matrix(&x, &[vec![2.0, 0.3], vec![0.3, 1.0]]);
    let out = bin().args(["dsr", "--X"]).arg(&x).arg("--Y").arg(&x).args(["--k", "1"]).output().unwrap();
    let v = stdout_json(&out);
    assert_eq!(v["schema"], "1");
    assert!(v["dsr"].as_f64().unwrap().abs() < 1e-12);
    assert!(!v["minimal_pairs"].as_array().unwrap().is_empty());
}

#[test]
fn reduce_rejects_p11_witness() {
    let dir = tempfile::tempdir().unwrap();
    let r = dir.path().join("r.json");
    let inv = phi(&example_plane_wp_prime(11).unwrap()).unwrap();
    let m = inv.rotation().matrix();
    let rows: Vec<Vec<f64>> = (0..11).map(|i| m.row(i).iter().copied().collect()).collect();
    write_matrix(&r, &rows);
    let out = bin().arg("reduce").arg("--R").arg(&r).output().unwrap();
    let v = stdout_json(&out);
    assert_eq!(v["reducible"], false);
    assert_eq!(v["sigma"].as_array().unwrap().len(), 0);
    assert_eq!(v["d_before"], v["d_after"]);
}

#[test]
fn verify_single_check_exits_zero() {
    let out = bin().args(["verify", "--seed", "7", "--only", "4"]).output().unwrap();
    let v = stdout_json(&out);
    assert_eq!(v["all_pass"], true);
    assert_eq!(v["checks"].as_array().unwrap().len(), 1);
    assert_eq!(v["checks"][0]["id"], "4");
}

#[test]
fn verify_unknown_check_exits_two() {
    let out = bin().args(["verify", "--only", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_json_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.json");
    std::fs::write(&x, b"this is not json").unwrap();
    let out = bin().arg("dsr").arg("--X").arg(&x).arg("--Y").arg(&x).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cap_exceeded_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.json");
    // 3x3 identity with cap forced down to 2 via the environment override.
    write_matrix(&x, &[vec![1.0, 0.0, 0.0], vec![0.0, 2.0, 0.0], vec![0.0, 0.0, 3.0]]);
    let out = bin()
        .arg("classify")
        .arg("--X")
        .arg(&x)
        .arg("--Y")
        .arg(&x)
        .env("SPDGEO_CAP_P", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn dsr_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.json");
    let y = dir.path().join("y.json");
    write_matrix(&x, &[vec![2.0, 0.3], vec![0.3, 1.0]]);
    write_matrix(&y, &[vec![1.0, 0.0], vec![0.0, 3.0]]);
    let run = || {
        bin()
            .arg("dsr")
            .arg("--X")
            .arg(&x)
            .arg("--Y")
            .arg(&y)
            .args(["--seed", "5"])
            .output()
            .unwrap()
    };
    let a = run();
    let b = run();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout, "two runs with identical config must be byte-identical");
}

#[test]
fn grass_nearest_reports_plane() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.json");
    write_matrix(&w, &[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]);
    let out = bin().arg("grass").arg("nearest").arg("--W").arg(&w).output().unwrap();
    let v = stdout_json(&out);
    assert_eq!(v["J"], serde_json::json!([0, 1]));
    assert!(v["d"].as_f64().unwrap().abs() < 1e-12);
    assert!(v["min_sin2"].as_f64().unwrap().abs() < 1e-12);
}
