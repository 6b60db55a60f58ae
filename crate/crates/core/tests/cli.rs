use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn domsplit(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_domsplit"))
        .args(args)
        .env("DOMSPLIT_OUTPUT_DIR", out)
        .env("DOMSPLIT_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn run_config(name: &str, out: &Path) -> Output {
    let cfg = configs().join(name);
    domsplit(&["run", cfg.to_str().unwrap()], out)
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn output_of<'a>(r: &'a Value, command: &str) -> &'a Value {
    &r["results"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["command"] == command)
        .unwrap_or_else(|| panic!("no {command} result"))["output"]
}

#[test]
fn golden_mean_lists_seven_period_four_points() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config("golden_mean_periodic.json", dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    let fixed = output_of(&r, "periodic-data")["fixed_points"]["4"].as_array().unwrap().clone();
    assert_eq!(fixed.len(), 7);
    assert!(!fixed.iter().any(|w| w.as_str().unwrap().contains("11")));
    assert_eq!(output_of(&r, "enumerate-periodic")["fixed_point_count"], 7);
    assert_eq!(r["format_version"], 1);
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn conjugated_family_certifies() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config("conjugated_certify.json", dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    let out = output_of(&r, "certify");
    assert_eq!(out["certificate"]["verdict"], "certified");
    let tau = out["certificate"]["tau_fit"].as_f64().unwrap();
    assert!((tau - (-2f64).exp()).abs() <= 0.05, "tau_fit = {tau}");
    assert_eq!(out["verification"]["pass_rate"].as_f64(), Some(1.0));
    let csv = std::fs::read_to_string(dir.path().join("00_certify_k1.csv")).unwrap();
    assert!(csv.starts_with("n,q,value\n10,1,"));
}

#[test]
fn swap_rejection_exits_two_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config("swap_reject.json", dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    assert_eq!(r["rejected"], true);
    let cert = &output_of(&r, "certify")["certificate"];
    assert_eq!(cert["verdict"], "rejected");
    let witnesses = cert["witnesses"].as_array().unwrap();
    assert!(witnesses.iter().any(|w| w["point"] == "(01)(01)"));
}

#[test]
fn negative_tolerance_exits_one_naming_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("conjugated_certify.json"))
        .unwrap()
        .replace("\"require_certified\": true", "\"require_certified\": true, \"tau_accept\": -1.0");
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, text).unwrap();
    for sub in ["run", "validate"] {
        let o = domsplit(&[sub, cfg.to_str().unwrap()], &dir.path().join("out"));
        assert_eq!(o.status.code(), Some(1));
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains("analysis[0].tau_accept"), "{err}");
    }
    assert!(!dir.path().join("out").exists());
}

#[test]
fn numeric_error_exits_one_with_module() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("golden_mean_periodic.json"))
        .unwrap()
        .replace("\"period\": 4}", "\"period\": 40}");
    let cfg = dir.path().join("big.json");
    std::fs::write(&cfg, text).unwrap();
    let o = domsplit(&["run", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sft_base: resource limit"));
}

#[test]
fn unwritable_output_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = run_config("golden_mean_periodic.json", &blocker.join("sub"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reports_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run_config("full_suite.json", a.path()).status.code(), Some(0));
    let cfg = configs().join("full_suite.json");
    let o = Command::new(env!("CARGO_BIN_EXE_domsplit"))
        .args(["run", cfg.to_str().unwrap(), "--output-dir", b.path().to_str().unwrap()])
        .env("DOMSPLIT_THREADS", "5")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 5);
    for n in names {
        assert_eq!(std::fs::read(a.path().join(&n)).unwrap(), std::fs::read(b.path().join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn uniform_convergence_csv_header() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_config("full_suite.json", dir.path()).status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("08_uniform_convergence.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,q,e_n"));
    assert_eq!(lines.count(), 3);
    let r = report(dir.path());
    assert_eq!(output_of(&r, "classify")["classification"]["hyperbolicity"]["kind"], "uniform");
    assert_eq!(output_of(&r, "shadow")["verified"], true);
}

#[test]
fn schema_lists_every_command() {
    let dir = tempfile::tempdir().unwrap();
    let o = domsplit(&["schema"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let analysis = &v["config"]["fields"]["analysis"];
    for c in [
        "enumerate-periodic",
        "periodic-data",
        "gelfand-profile",
        "spectrum",
        "certify",
        "classify",
        "shadow",
        "semicontinuity",
        "uniform-convergence",
    ] {
        assert!(analysis.get(c).is_some(), "{c}");
    }
}
