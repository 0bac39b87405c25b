use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn purifsim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_purifsim"))
        .args(args)
        .env("PURIFSIM_OUTPUT_DIR", out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Short noise-off-then-on scan so the suite stays fast.
fn small_config(dir: &Path) -> String {
    let path = dir.join("small.json");
    fs::write(
        &path,
        r#"{
            "schema_version": 1,
            "pair_fidelity": [0.98, 0.98],
            "noise_sigma_1": 1.0,
            "noise_sigma_2": 1.0,
            "scan": { "periods_per_regime": 6 },
            "dwell_s": 20.0
        }"#,
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn purify_prints_closed_form() {
    let tmp = TempDir::new().unwrap();
    let o = purifsim(&["purify", "--f1", "0.75", "--f2", "0.75"], tmp.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("F_tilde = 0.807692"), "{text}");
    assert!(text.contains("p = 0.40625"), "{text}");
    let o = purifsim(&["purify", "--f1", "1", "--f2", "1", "--json"], tmp.path());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["F_tilde"], 1.0);
    assert_eq!(v["p_success"], 0.5);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let code = |args: &[&str]| purifsim(args, tmp.path()).status.code();
    assert_eq!(code(&["frobnicate"]), Some(1));
    assert_eq!(code(&["purify", "--f1", "0.7", "--f2", "0.7", "--bogus"]), Some(1));
    assert_eq!(code(&["purify", "--f1", "1.5", "--f2", "0.7"]), Some(1));
    assert_eq!(code(&["simulate", "--f1", "0.9", "--f2", "0.9", "--vacuum", "1"]), Some(2));
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{ "schema_version": 1, "noise_sigma": 1.0 }"#).unwrap();
    assert_eq!(code(&["experiment", "--config", bad.to_str().unwrap()]), Some(1));
    assert_eq!(code(&["experiment", "--config", "/nonexistent/config.json"]), Some(1));
    assert_eq!(code(&["--help"]), Some(0));
}

#[test]
fn simulate_matches_closed_form() {
    let tmp = TempDir::new().unwrap();
    let o = purifsim(&["simulate", "--f1", "0.9", "--f2", "0.6", "--json"], tmp.path());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let d = v["F_tilde"].as_f64().unwrap() - v["F_tilde_closed_form"].as_f64().unwrap();
    assert!(d.abs() < 1e-12);
}

#[test]
fn table_outputs() {
    let tmp = TempDir::new().unwrap();
    assert!(purifsim(&["sweep", "--f1", "0.8", "--f2", "0.8", "--points", "5"], tmp.path())
        .status
        .success());
    let sweep = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    assert!(sweep.starts_with("T,F_tilde,p_success\n"));
    assert_eq!(sweep.lines().count(), 6);

    assert!(purifsim(&["repeater", "--epsilon", "0.05", "--levels", "2"], tmp.path())
        .status
        .success());
    let rep = fs::read_to_string(tmp.path().join("repeater.csv")).unwrap();
    assert_eq!(rep, "level,epsilon\n0,0.05\n1,0.1\n2,0.2\n");

    assert!(purifsim(&["hom", "--points", "5", "--target-visibility", "0.99"], tmp.path())
        .status
        .success());
    let hom = fs::read_to_string(tmp.path().join("hom.csv")).unwrap();
    assert!(hom.starts_with("phase_or_delay,counts,accidentals,regime_flag\n"));
    let summary: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("hom.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 42);
    assert_eq!(summary["config_digest"].as_str().unwrap().len(), 64);
    assert!((summary["result"]["v_dip"].as_f64().unwrap() - 0.99).abs() < 0.005);
}

#[test]
fn experiment_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let o = purifsim(&["experiment", "--config", &cfg, "--seed", "7"], &a);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(purifsim(&["experiment", "--config", &cfg, "--seed", "7", "--threads", "1"], &b)
        .status
        .success());
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 7);
    for name in &names {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name:?} differs"
        );
    }
    let summary: Value = serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 7);
    assert!(summary["config_digest"].is_string());
    let hist = fs::read_to_string(a.join("histogram_purified_regime1.csv")).unwrap();
    assert!(hist.starts_with("bin_center,density,gaussian\n"));

    let c = tmp.path().join("c");
    purifsim(&["experiment", "--config", &cfg, "--seed", "8"], &c);
    assert_ne!(fs::read(a.join("pair1.csv")).unwrap(), fs::read(c.join("pair1.csv")).unwrap());
}

#[test]
fn flag_overrides_environment() {
    let tmp = TempDir::new().unwrap();
    let flag_dir = tmp.path().join("flag");
    let env_dir = tmp.path().join("env");
    let o = purifsim(
        &["repeater", "--epsilon", "0.01", "--levels", "1", "--output-dir", flag_dir.to_str().unwrap()],
        &env_dir,
    );
    assert!(o.status.success());
    assert!(flag_dir.join("repeater.csv").exists());
    assert!(!env_dir.exists());
}

#[test]
fn analyze_reads_fringe_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let o = purifsim(&["fringe", "--config", &cfg, "--source", "pair1"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let input = tmp.path().join("fringe_pair1.csv");
    let out = tmp.path().join("analysis");
    let o = purifsim(&["analyze", "--input", input.to_str().unwrap(), "--subtract-recorded"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(out.join("analysis.json")).unwrap()).unwrap();
    let regimes = v["result"]["regimes"].as_array().unwrap();
    assert_eq!(regimes.len(), 2);
    let noisy = regimes[1]["estimate"]["mean"].as_f64().unwrap();
    // 0.5 + 0.48 exp(-1/2)
    assert!((noisy - 0.791).abs() < 0.03, "{noisy}");
    assert!(out.join("histogram_regime0.csv").exists());

    fs::write(tmp.path().join("wrong.csv"), "phase,counts\n0,1\n").unwrap();
    let o = purifsim(&["analyze", "--input", tmp.path().join("wrong.csv").to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(1));
}
