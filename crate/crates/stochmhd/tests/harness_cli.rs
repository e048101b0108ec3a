//! End-to-end runs through the harness and the command-line binary.

use std::fs;
use std::process::Command;

use stochmhd::harness::{run_experiment, ExperimentConfig, ExperimentKind, Manifest, OUT_DIR_ENV};
use stochmhd::checkpoint::sha256_hex;

fn tree(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn identities_are_bitwise_reproducible_across_thread_counts() {
    let cfg = ExperimentConfig::new(ExperimentKind::Identities, 32);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let ra = one.install(|| run_experiment(&cfg, a.path(), a.path())).unwrap();
    let rb = four.install(|| run_experiment(&cfg, b.path(), b.path())).unwrap();
    assert!(ra.passed() && rb.passed());
    assert_eq!(tree(a.path()), tree(b.path()));
}

#[test]
fn manifest_lists_every_output_with_its_hash() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Simulate, 16);
    cfg.t_final = 0.02;
    cfg.dt = 0.005;
    cfg.checkpoint = true;
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&cfg, dir.path(), dir.path()).unwrap();
    let m: Manifest = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m, out.manifest);
    let on_disk: Vec<String> = tree(dir.path()).into_iter().map(|(n, _)| n).filter(|n| n != "manifest.json").collect();
    let listed: Vec<String> = m.files.iter().map(|f| f.path.clone()).collect();
    assert_eq!(on_disk, listed);
    for f in &m.files {
        assert_eq!(sha256_hex(&fs::read(dir.path().join(&f.path)).unwrap()), f.sha256);
    }
    assert_eq!(m.config_sha256, sha256_hex(&fs::read(dir.path().join("config.json")).unwrap()));
}

#[test]
fn deterministic_decay_run_is_monotone() {
    let cfg_text = r#"{
        "kind": "simulate", "n": 16, "noise_u": false, "noise_b": false,
        "t_final": 0.1, "dt": 0.005, "every": 2,
        "initial": {"u": {"kind": "random", "seed": 4, "decay": 2.0, "band": 5, "l2": 1.0}, "b": {"kind": "zero"}}
    }"#;
    let cfg = stochmhd::harness::parse_config_str(cfg_text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&cfg, dir.path(), dir.path()).unwrap();
    assert!(out.passed(), "{:?}", out.invariants);
    assert!(out.invariants.iter().any(|i| i.name.starts_with("energy_decreasing")));
}

#[test]
fn cli_exit_codes_and_env_output_dir() {
    let bin = env!("CARGO_BIN_EXE_stochmhd");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from_env");
    let st = Command::new(bin)
        .args(["noise-stats", "--n", "16", "--seed", "5", "--threads", "2"])
        .env(OUT_DIR_ENV, &out)
        .status()
        .unwrap();
    assert!(st.success());
    let m: Manifest = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m.seeds, vec![5]);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"kind": "simulate", "n": 16, "exponent": 5}"#).unwrap();
    let o = Command::new(bin)
        .args(["simulate", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exponent"));

    let mismatch = Command::new(bin)
        .args(["galerkin", "--config", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(mismatch.status.code(), Some(2));
}
