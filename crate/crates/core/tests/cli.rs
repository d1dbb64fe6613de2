use std::path::Path;
use std::process::{Command, Output};

fn qfilter(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qfilter"));
    cmd.args(args);
    match env_out {
        Some(p) => cmd.env("QFILTER_OUT", p),
        None => cmd.env_remove("QFILTER_OUT"),
    };
    cmd.output().unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn run_writes_manifest_with_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q");
    let o = qfilter(&["run", "qubit-counting", "--N", "20", "--T", "0.5", "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["completed_trajectories"], 20);
    for a in manifest["artifacts"].as_array().unwrap() {
        let bytes = std::fs::read(out.join(a["file"].as_str().unwrap())).unwrap();
        assert_eq!(a["bytes"].as_u64().unwrap() as usize, bytes.len());
        assert_eq!(a["sha256"].as_str().unwrap(), qfilter::cli::artifacts::sha256_hex(&bytes));
    }
    assert!(manifest["config"].as_str().unwrap().contains("N = 20"));
}

#[test]
fn env_var_sets_default_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = qfilter(&["run", "spectra"], Some(dir.path()));
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert!(dir.path().join("spectra").join("spectrum.csv").exists());
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "scenario = \"closed-form\"\nseed = 7\n\n[grid]\nT = 0.5\ndt = 0.001\n").unwrap();
    let out = dir.path().join("cf");
    let o = qfilter(&["run", "closed-form", "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("seed = 9"));
    assert!(manifest.contains("T = 0.5"));

    let o = qfilter(&["run", "bell", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("closed-form"));
}

#[test]
fn unknown_key_is_a_config_error_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "scenario = \"cat\"\n\n[model]\nspin = 3\n").unwrap();
    let o = qfilter(&["run", "cat", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("config error at line 4"), "{}", text(&o.stderr));
}

#[test]
fn compare_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (d, seed) in [(&a, "1"), (&b, "2")] {
        let o = qfilter(&["run", "qubit-diffusive", "--N", "50", "--seed", seed, "--out", d.to_str().unwrap()], None);
        assert!(o.status.success(), "{}", text(&o.stderr));
    }
    let ea = a.join("ensemble.csv");
    let eb = b.join("ensemble.csv");
    let o = qfilter(&["compare", ea.to_str().unwrap(), ea.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report["columns"].as_array().unwrap().iter().all(|c| c["max_abs_deviation"] == 0.0));

    let o = qfilter(&["compare", ea.to_str().unwrap(), eb.to_str().unwrap(), "--tol", "1e-9"], None);
    assert_eq!(o.status.code(), Some(1));
    let o = qfilter(&["compare", ea.to_str().unwrap(), eb.to_str().unwrap(), "--tol", "1,t=0"], None);
    assert_eq!(o.status.code(), Some(0));
    let o = qfilter(&["compare", ea.to_str().unwrap(), a.join("trajectory_0.csv").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_flags_exit_two() {
    assert_eq!(qfilter(&["run", "nonsense"], None).status.code(), Some(2));
    assert_eq!(qfilter(&["run", "bell", "--r0", "1,2"], None).status.code(), Some(2));
    let o = qfilter(&["list-scenarios"], None);
    assert!(o.status.success());
    assert_eq!(text(&o.stdout).lines().count(), 9);
}
