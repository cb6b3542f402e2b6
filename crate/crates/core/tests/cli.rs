use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn speclab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_speclab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .env_remove("SPECLAB_OUT")
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn calibrate_writes_both_sources() {
    let dir = tempfile::tempdir().unwrap();
    let out = speclab(&["calibrate", "--alpha", "1", "--channels", "2"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    let theta = r["theta"].as_array().unwrap();
    let sources: Vec<&str> = theta.iter().map(|t| t["source"].as_str().unwrap()).collect();
    assert_eq!(sources, ["closed_form", "pipeline"]);
    assert!((theta[0]["theta_bar"].as_f64().unwrap() - 0.007_282_4).abs() < 5e-8);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["command"], "calibrate");
    assert_eq!(manifest["config"]["parameters"]["channels"], 2);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[parameters]\nunknown_key = 1\n").unwrap();
    let out = speclab(&["plates", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = speclab(&["plates", "--channels", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = speclab(&["no-such-command"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let missing = dir.path().join("absent.toml");
    let out = speclab(&["plates", "--config", missing.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "seed = 5\nformat = \"csv\"\n[parameters]\na = [2.0]\nchannels = 3\n").unwrap();
    let out = speclab(&["plates", "--config", cfg.to_str().unwrap(), "--a", "1", "--format", "both"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    let c = &r["manifest"]["config"];
    assert_eq!(c["seed"], 5);
    assert_eq!(c["parameters"]["a"], serde_json::json!([1.0]));
    assert_eq!(c["parameters"]["channels"], 3);
    let plot = fs::read_to_string(dir.path().join("plot_trace.csv")).unwrap();
    assert_eq!(plot.lines().count(), 1 + 12);
    assert!(plot.starts_with("x,y,series"));
}

#[test]
fn boxint_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["boxint", "--alpha", "0.5,1,2", "--n-samples", "20000", "--seed", "9", "--format", "both"];
    for d in [a.path(), b.path()] {
        let out = speclab(&args, d);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["delta.csv", "plot_delta.csv", "plot_concavity.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let (ra, rb) = (report(a.path()), report(b.path()));
    assert_eq!(ra["delta"], rb["delta"]);
    assert_eq!(ra["checks"], rb["checks"]);
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_speclab"))
        .args(["reduce", "--lambda", "1", "-q"])
        .env("SPECLAB_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("manifest.json").exists());
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn verify_all_lists_every_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let out = speclab(&["verify-all"], dir.path());
    let r = report(dir.path());
    let criteria = r["criteria"].as_array().unwrap();
    assert_eq!(criteria.len(), 12);
    let failed: Vec<u64> =
        criteria.iter().filter(|c| c["passed"] == false).map(|c| c["id"].as_u64().unwrap()).collect();
    // the restriction criterion is unattainable at the critical exponent
    assert_eq!(failed, [3]);
    assert_eq!(out.status.code(), Some(1));
    let failures = r["failures"].as_array().unwrap();
    assert!(!failures.is_empty());
    assert!(failures.iter().all(|f| f["name"].as_str().unwrap().starts_with("[3]")));
}
