use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sllg::config::RunConfig;
use sllg::output::RunManifest;

const BIN: &str = env!("CARGO_BIN_EXE_sllg");

fn base_config(t_final: f64) -> String {
    format!(
        r#"{{
  "model": {{
    "lambda1": 1.0,
    "lambda2": 0.5,
    "anisotropy": {{"kind": "uniaxial", "axis": [0.0, 0.0, 1.0], "strength": 0.5}},
    "noise": [{{"kind": "cosine", "vector": [0.3, 0.0, 0.4], "mode": 1}}],
    "initial": {{"kind": "twist", "amplitude": 1.0, "mode": 1}}
  }},
  "domain": {{"n_modes": 8}},
  "stepper": {{"dt": 0.01, "t_final": {t_final}}},
  "output": {{"snapshot_stride": 10}}
}}"#
    )
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("SLLG_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn verify_with_builtin_config_passes() {
    let out = run(&["verify"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("PASS"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn zero_duration_simulation_writes_initial_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &base_config(0.0));
    let dir = tmp.path().join("out");
    let out = run(&["simulate", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.join("timeseries.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("time,l2,v_norm,energy"));
    assert_eq!(lines[1].split(',').count(), 9);
}

#[test]
fn unknown_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let text = base_config(0.1).replace("\"n_modes\": 8", "\"n_modes\": 8, \"n_mode\": 4");
    let cfg = write_config(tmp.path(), &text);
    let out = run(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("\"config\""), "{err}");
    assert!(err.contains("n_mode"), "{err}");
}

#[test]
fn invalid_damping_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &base_config(0.1).replace("\"lambda2\": 0.5", "\"lambda2\": 0.0"),
    );
    let out = run(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let out = run(&["simulate", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ensemble_rerun_is_byte_identical_and_manifest_checks_out() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &base_config(0.2));
    let mut dirs = Vec::new();
    for (i, threads) in ["1", "3"].iter().enumerate() {
        let dir = tmp.path().join(format!("run{i}"));
        let out = Command::new(BIN)
            .args([
                "ensemble",
                "--config",
                &cfg,
                "--seed",
                "11",
                "--out",
                dir.to_str().unwrap(),
            ])
            .env("SLLG_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        dirs.push(dir);
    }
    let m0 = RunManifest::read(&dirs[0].join("manifest.json")).unwrap();
    let m1 = RunManifest::read(&dirs[1].join("manifest.json")).unwrap();
    assert!(m0.verify_files(&dirs[0]).unwrap().is_empty());
    assert_eq!(m0.files, m1.files);
    assert_eq!(m0.config.ensemble.seed, 11);
    assert!(m0.files.iter().any(|f| f.name == "summary.csv"));

    // the stored config reloads to the same run
    let text = m0.config.to_json();
    let back = RunConfig::from_json(&text).unwrap();
    assert_eq!(back, m0.config);

    fs::write(dirs[0].join("summary.csv"), "tampered\n").unwrap();
    assert_eq!(
        m0.verify_files(&dirs[0]).unwrap(),
        vec!["summary.csv".to_string()]
    );
}

#[test]
fn multi_replica_ensemble_writes_every_replica() {
    let tmp = tempfile::tempdir().unwrap();
    let text = base_config(0.1).replace(
        "\"output\"",
        "\"ensemble\": {\"replicas\": 4},\n  \"output\"",
    );
    let cfg = write_config(tmp.path(), &text);
    let dir = tmp.path().join("ens");
    let out = run(&["ensemble", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for r in 0..4 {
        assert!(dir.join(format!("replica_{r:04}.csv")).exists());
        let bytes = fs::read(dir.join(format!("replica_{r:04}.bin"))).unwrap();
        let (n, snaps) = sllg::output::decode_snapshots(&bytes).unwrap();
        assert_eq!(n, 8);
        assert_eq!(snaps.first().unwrap().step, 0);
    }
    let summary = fs::read_to_string(dir.join("summary.csv")).unwrap();
    assert!(summary.lines().any(|l| l.starts_with("sup_energy,")));
}

#[test]
fn scheme_override_takes_effect() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &base_config(0.1));
    let dir = tmp.path().join("o");
    let out = run(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        dir.to_str().unwrap(),
        "--scheme",
        "heun_stratonovich",
        "--dt",
        "0.005",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let m = RunManifest::read(&dir.join("manifest.json")).unwrap();
    assert_eq!(m.config.stepper.dt, 0.005);
    let rows = fs::read_to_string(dir.join("timeseries.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(rows, 1 + 21);
    let bad = run(&["simulate", "--config", &cfg, "--scheme", "rk4"]);
    assert_eq!(bad.status.code(), Some(2));
}
