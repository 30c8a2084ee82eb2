use std::path::Path;
use std::process::{Command, Output};

fn geokernel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geokernel"))
        .args(args)
        .env_remove("GEOKERNEL_PRECISION")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json_file(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn circle_witness_at_small_bandwidth() {
    let out = geokernel(&["witness", "circle", "--lambda", "0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let cert: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let q: f64 = cert["quad_form"].as_str().unwrap().parse().unwrap();
    assert!((q + 0.18998).abs() < 1e-5, "{q}");
    assert_eq!(cert["points"].as_array().unwrap().len(), 4);
}

#[test]
fn certificate_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("cert.json");
    let out = geokernel(&["witness", "circle", "--lambda", "0.3", "--output", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));

    let ok = geokernel(&["verify-certificate", file.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(stdout(&ok).starts_with("ok:"));

    let mut cert = json_file(&file);
    cert["coefficients"][0] = serde_json::json!("0.9");
    let tampered = dir.path().join("tampered.json");
    std::fs::write(&tampered, serde_json::to_string(&cert).unwrap()).unwrap();
    let bad = geokernel(&["verify-certificate", tampered.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("mismatch"));
}

#[test]
fn transferred_witness_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("g.json");
    let out = geokernel(&["witness", "space", "--target", "grassmann:2,4", "--lambda", "0.2", "--output", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(json_file(&file)["transfer"].is_object());
    assert_eq!(geokernel(&["verify-certificate", file.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn pd_check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let euclid = dir.path().join("e.json");
    let sampled = geokernel(&["sample-points", "--space", "euclidean:3", "--count", "6", "--seed", "4"]);
    std::fs::write(&euclid, &sampled.stdout).unwrap();
    let out = geokernel(&["pd-check", "--lambda", "1", "--points", euclid.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["outputs"]["verdict"], "positive_definite");

    // Four equispaced unit-circle points at a small bandwidth.
    let circle = dir.path().join("c.json");
    std::fs::write(&circle, "[0, 1.5707963267948966, 3.141592653589793, 4.71238898038469]").unwrap();
    let out = geokernel(&["pd-check", "--space", "circle:1", "--lambda", "0.1", "--points", circle.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let missing = geokernel(&["pd-check", "--lambda", "0.1", "--points", circle.to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"space":{"variant":"sphere","n":2},"points":[[1,0,0],[0,3,0]]}"#).unwrap();
    let out = geokernel(&["pd-check", "--lambda", "1", "--points", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("points[1]"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(geokernel(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(geokernel(&["circle-spectrum", "--lambda", "1"]).status.code(), Some(1));
    assert_eq!(geokernel(&["circle-spectrum", "--lambda", "-1", "--n", "4"]).status.code(), Some(1));
    assert_eq!(geokernel(&["--help"]).status.code(), Some(0));
}

#[test]
fn outputs_are_deterministic() {
    let runs: &[&[&str]] = &[
        &["witness", "circle", "--lambda", "0.7", "--precision", "40"],
        &["theta", "--mu", "1,10", "--r", "0,2", "--n", "8,16"],
        &["bound-check", "--mu", "39.47841760435743", "--n-list", "20,40"],
        &["lambda-profile", "--n-list", "4,8"],
        &["sample-points", "--space", "spd:2,stein", "--count", "3", "--seed", "9"],
        &["embed-verify", "--target", "sphere:3", "--pairs", "50"],
        &["stein-scan", "--dim", "2", "--lambda", "0.5", "--trials", "4"],
    ];
    for args in runs {
        let a = geokernel(args);
        let b = geokernel(args);
        assert_eq!(a.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert!(a.stdout.ends_with(b"\n") && !a.stdout.contains(&b'\r'));
    }
}

#[test]
fn csv_shapes() {
    let out = stdout(&geokernel(&["circle-spectrum", "--lambda", "1", "--n", "6"]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "j,w_j");
    assert_eq!(lines.len(), 7);

    let out = stdout(&geokernel(&["bound-check", "--mu", "39.47841760435743", "--n-list", "20"]));
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    let w: f64 = row[2].parse().unwrap();
    assert!((w + 3.994216913201377e-5).abs() < 1e-15, "{w}");
    assert_eq!(row[5], "true");
}

#[test]
fn precision_from_environment() {
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_geokernel"));
        cmd.args(["theta", "--mu", "3", "--n", "8"]);
        if let Some(f) = flag {
            cmd.args(["--precision", f]);
        }
        match env {
            Some(v) => cmd.env("GEOKERNEL_PRECISION", v),
            None => cmd.env_remove("GEOKERNEL_PRECISION"),
        };
        let out = cmd.output().unwrap();
        assert_eq!(out.status.code(), Some(0));
        stdout(&out).lines().nth(1).unwrap().rsplit(',').next().unwrap().to_string()
    };
    assert_eq!(run(None, None), "30");
    assert_eq!(run(Some("50"), None), "50");
    assert_eq!(run(Some("50"), Some("20")), "20");
}
