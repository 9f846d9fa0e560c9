use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn galbrun(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_galbrun")).args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = args.to_vec();
    all.extend(["--out", dir.to_str().unwrap()]);
    galbrun(&all)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn version_names_the_schema() {
    let out = galbrun(&["--version"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains(&format!("config schema {}", galbrun::cli::SCHEMA_VERSION)), "{text}");
}

#[test]
fn check_reports_the_subsonic_margin() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("sun1d.toml");
    let out = run_in(dir.path(), &["check", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = json(&dir.path().join("check.json"));
    assert_eq!(rep["sector"]["theta"].as_f64(), Some(0.0));
    let mach = rep["admissibility"]["mach_inf"].as_f64().unwrap();
    let thm = rep["admissibility"]["conditions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "Thm3.10")
        .unwrap();
    assert!((thm["margin"].as_f64().unwrap() - (1.0 - mach * mach)).abs() < 1e-14);
    assert_eq!(thm["pass"], true);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let cfg = config("sun1d.toml");
    let args = ["sweep", "--config", cfg.to_str().unwrap(), "--mach", "0.2,0.4", "--levels", "2"];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(run_in(a.path(), &args).status.success());
    assert!(run_in(b.path(), &args).status.success());
    for f in ["sweep.json", "sweep.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let (ma, mb) = (json(&a.path().join("sweep.manifest.json")), json(&b.path().join("sweep.manifest.json")));
    assert_eq!(ma["config_hash"], mb["config_hash"]);
    assert_eq!(ma["overrides"]["mach"], "0.2,0.4");
    assert_eq!(ma["overrides"]["seed"], "0");
}

#[test]
fn sweep_writes_one_row_per_mach_and_level() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("sun1d.toml");
    let out = run_in(dir.path(), &["sweep", "--config", cfg.to_str().unwrap(), "--mach", "0.1,0.3,0.5", "--levels", "3"]);
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r[3] > 0.0));
}

#[test]
fn schur_and_direct_solutions_agree() {
    let cfg = config("sun1d.toml");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let base = ["solve", "--config", cfg.to_str().unwrap(), "--model", "full"];
    assert!(run_in(a.path(), &[&base[..], &["--path", "direct"]].concat()).status.success());
    assert!(run_in(b.path(), &[&base[..], &["--path", "schur"]].concat()).status.success());
    let (ra, rb) = (csv_rows(&a.path().join("solution.csv")), csv_rows(&b.path().join("solution.csv")));
    assert_eq!(ra.len(), rb.len());
    let gap = ra.iter().flatten().zip(rb.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-10, "{gap}");
}

#[test]
fn bad_input_exits_one_with_a_json_error() {
    let cfg = config("sun1d.toml");
    for args in [
        vec!["check", "--config", "/nonexistent.toml"],
        vec!["solve", "--config", cfg.to_str().unwrap(), "--bogus"],
    ] {
        let out = galbrun(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(err["exit_code"], 1);
        assert!(err["error"].is_string() && err["message"].is_string());
    }
}

#[test]
fn invalid_config_is_rejected_before_solving() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("sun1d.toml")).unwrap().replace("omega = 1.0", "omega = 0.0");
    let path = dir.path().join("zero.toml");
    std::fs::write(&path, text).unwrap();
    let out = galbrun(&["solve", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("solution.csv").exists());
}
