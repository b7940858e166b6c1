use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use zps_core::config::{sidecar_path, Sidecar};

fn zps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zps-sim"))
        .args(args)
        .env_remove("ZPS_SIM_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key))
        .unwrap_or_else(|| panic!("no {key} in {report}"))
        .trim()
        .parse()
        .unwrap()
}

fn file_hash(p: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(p).unwrap()))
}

#[test]
fn state_reports_mandel_q() {
    let o = zps(&["state", "--kind", "heralded", "--beta", "0.6667"]);
    assert!(o.status.success());
    let r = stdout(&o);
    assert!((field(&r, "mean:") - 0.6667).abs() < 1e-6);
    assert!((field(&r, "Mandel Q:") + 0.6667).abs() < 1e-6);

    let r = stdout(&zps(&["state", "--kind", "coherent", "--mean", "1"]));
    assert!(field(&r, "Mandel Q:").abs() < 1e-6);
    let r = stdout(&zps(&["state", "--kind", "fock", "--n", "1"]));
    assert!((field(&r, "Mandel Q:") + 1.0).abs() < 1e-12);
}

#[test]
fn state_json_output() {
    let o = zps(&[
        "state", "--kind", "thermal", "--mean", "0.5", "--format", "json",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["moments"]["mandel_q"].as_f64().unwrap() - 0.5).abs() < 1e-6);
}

#[test]
fn bad_input_fails() {
    assert!(!zps(&["state", "--kind", "fock"]).status.success());
    assert!(!zps(&["state", "--kind", "heralded", "--beta", "1.5"])
        .status
        .success());
    assert!(!zps(&["sweep", "--recipe", "nope"]).status.success());
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    let text = include_str!("../recipes/fig3a.json").replace("\"seed\"", "\"colour\": 1, \"seed\"");
    std::fs::write(&cfg, text).unwrap();
    let o = zps(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let text = include_str!("../recipes/fig3a.json")
        .replace("\"schema_version\": 1", "\"schema_version\": 9");
    std::fs::write(&cfg, text).unwrap();
    assert!(!zps(&["mc", "--config", cfg.to_str().unwrap()])
        .status
        .success());
}

#[test]
fn recipes_reproduce_headline_numbers() {
    let dir = tempfile::tempdir().unwrap();

    let out = dir.path().join("fig3a.csv");
    let o = zps(&["sweep", "--recipe", "fig3a", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout(&o);
    assert!((field(&r, "K min:") - 1.0).abs() < 1e-6);
    assert!((field(&r, "K max:") - 1.0).abs() < 1e-6);

    let out = dir.path().join("fig3b.csv");
    let o = zps(&["sweep", "--recipe", "fig3b", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!((field(&stdout(&o), "K min:") - 0.862).abs() < 1e-3);
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("R,K_analytic,"));

    let out = dir.path().join("fig4.json");
    let o = zps(&[
        "sweep",
        "--recipe",
        "fig4",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let last = v.as_array().unwrap().last().unwrap();
    assert_eq!(last["eta1"], 0.0);
    assert!((last["K_smsv"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((last["K_heralded"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let sc = Sidecar::from_json_str(&std::fs::read_to_string(sidecar_path(&out)).unwrap()).unwrap();
    assert!(sc.config.sweep.is_some());
}

#[test]
fn mc_is_deterministic_and_sidecar_reparses() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.bin");
    for p in [&a, &b] {
        let o = zps(&[
            "mc",
            "--pulses",
            "200000",
            "--seed",
            "7",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(file_hash(&a), file_hash(&b));
    let o = zps(&[
        "mc",
        "--pulses",
        "200000",
        "--seed",
        "8",
        "--out",
        c.to_str().unwrap(),
    ]);
    assert!(o.status.success());

    let sc = Sidecar::from_json_str(&std::fs::read_to_string(sidecar_path(&a)).unwrap()).unwrap();
    assert_eq!(sc.metadata.seed, 7);
    assert_eq!(sc.config.experiment.n_pulses, 200_000);
    assert_eq!(sc.metadata.config_hash, sc.config.experiment.config_hash());
    let back = zps_core::RunConfig::from_json_str(&sc.config.to_json_pretty()).unwrap();
    assert_eq!(back, sc.config);
}

#[test]
fn mc_coherent_benchmark() {
    let o = zps(&["mc", "--pulses", "1000000", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let k = v["estimate"]["k_hat"].as_f64().unwrap();
    let se = v["estimate"]["std_err"].as_f64().unwrap();
    assert!((k - 1.0).abs() <= 3.0 * se);
    assert_eq!(v["passed"], true);
}

#[test]
fn mc_smsv_lossy_matches_oracle() {
    let o = zps(&[
        "mc",
        "--canonical",
        "smsv-lossy",
        "--pulses",
        "10000000",
        "--format",
        "json",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["z"].as_f64().unwrap().abs() <= 4.0);
}

#[test]
fn degenerate_estimator_exits_nonzero() {
    // Pure vacuum: no output clicks at all.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("vac.json");
    let text = include_str!("../recipes/fig3a.json").replace("\"mean\": 0.1", "\"mean\": 0.0");
    std::fs::write(&cfg, text).unwrap();
    let o = zps(&["mc", "--config", cfg.to_str().unwrap(), "--pulses", "1000"]);
    assert!(!o.status.success());
}

#[test]
fn validate_with_thread_cap() {
    let o = Command::new(env!("CARGO_BIN_EXE_zps-sim"))
        .args(["validate", "--pulses", "500000"])
        .env("ZPS_SIM_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stdout(&o));
    assert_eq!(
        stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(),
        5
    );
    let o = Command::new(env!("CARGO_BIN_EXE_zps-sim"))
        .args(["validate", "--pulses", "1000"])
        .env("ZPS_SIM_THREADS", "0")
        .output()
        .unwrap();
    assert!(!o.status.success());
}
