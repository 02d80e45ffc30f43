use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn erw(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_erw"))
        .args(args)
        .current_dir(cwd)
        .env_remove("ERW_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn validate_good_config_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    for name in [
        "convergence_tanh.toml",
        "convergence_markov.toml",
        "quenched_annealed.toml",
        "importance.toml",
        "modified_zero.toml",
        "local_time.toml",
        "weights.toml",
        "smoke.toml",
    ] {
        let out = erw(&["validate", config(name).to_str().unwrap()], tmp.path());
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(listing(tmp.path()).is_empty());
}

#[test]
fn missing_config_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = erw(&["run", "missing.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));
}

#[test]
fn unknown_flag_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = erw(&["validate", "--frobnicate", "x.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(
        &bad,
        "[experiment]\nkind = \"convergence\"\nladder = [1000, 100]\nreplicas = 1000\n[experiment.phi]\nfamily = \"tanh\"\nbound = 1.0\nparams = { a = 1.0, b = 1.0 }\n",
    )
    .unwrap();
    let out = erw(&["validate", "--config", bad.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("increasing"));
}

#[test]
fn enumerate_reports_normalization() {
    let tmp = tempfile::tempdir().unwrap();
    let out = erw(&["enumerate", "--steps", "10", "--phi", "tanh"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.starts_with("normalization defect")).unwrap();
    let value: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(value <= 1e-12);
    let out = erw(&["enumerate", "--steps", "8", "--phi", "l-threshold", "--omega"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn list_phi_prints_registry() {
    let tmp = tempfile::tempdir().unwrap();
    let out = erw(&["list-phi"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["constant", "x-linear", "l-threshold", "tanh", "l-linear"] {
        assert!(text.contains(name));
    }
}

#[test]
fn run_is_reproducible_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let cfg = config("smoke.toml");
    let out = erw(&["run", cfg.to_str().unwrap(), "--output", a.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let out = erw(
        &["run", "--config", cfg.to_str().unwrap(), "--output", b.to_str().unwrap(), "--workers", "2"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let names = listing(&a);
    assert_eq!(names, listing(&b));
    assert!(names.contains(&"report.json".to_string()));
    for name in names.iter().filter(|n| n.ends_with(".csv")) {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["master_seed"], 7);
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn seed_override_changes_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("smoke.toml");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    erw(&["run", cfg.to_str().unwrap(), "--output", a.to_str().unwrap()], tmp.path());
    erw(&["run", cfg.to_str().unwrap(), "--output", b.to_str().unwrap(), "--seed", "8"], tmp.path());
    let ra = fs::read(a.join("walk_samples.csv")).unwrap();
    let rb = fs::read(b.join("walk_samples.csv")).unwrap();
    assert_ne!(ra, rb);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(b.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["master_seed"], 8);
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let target = tmp.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_erw"))
        .args(["run", config("smoke.toml").to_str().unwrap()])
        .current_dir(tmp.path())
        .env("ERW_OUTPUT_DIR", &target)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(target.join("report.json").exists());
}

#[test]
fn unwritable_output_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = erw(
        &["run", config("smoke.toml").to_str().unwrap(), "--output", blocker.join("sub").to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_check_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("smoke.toml"))
        .unwrap()
        .replace("final_ks = 0.1", "final_ks = 0.0");
    let cfg = tmp.path().join("strict.toml");
    fs::write(&cfg, text).unwrap();
    let out = erw(&["run", cfg.to_str().unwrap(), "--output", tmp.path().join("o").to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}
