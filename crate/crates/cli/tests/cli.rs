use std::path::Path;
use std::process::Command;

fn lab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_transmute-lab"))
}

fn config(name: &str) -> String {
    format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn spectrum_run_passes_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let status = lab().args(["run", &config("spectrum.json"), "--out"]).arg(dir.path()).output().unwrap().status;
    assert_eq!(status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("spectrum-check.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("case,nodes,k,eigenvalue,exact,rel_err"));
    assert_eq!(lines.count(), 10);
    assert!(!csv.contains('\r'));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for (k, jobs) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(k.to_string());
        let status = lab().args(["run", &config("extension.json"), "--jobs", jobs, "--out"]).arg(&out).output().unwrap().status;
        assert_eq!(status.code(), Some(0));
    }
    for file in ["extension-check.csv", "extension-check-gates.csv"] {
        let a = std::fs::read(dir.path().join("0").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("1").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
}

#[test]
fn identity_gauge_passes() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("gauge.json")).unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&text).unwrap();
    let cases = cfg["cases"].as_array_mut().unwrap();
    cases.retain(|c| c["name"] == "identity");
    let path = write(dir.path(), "gauge.json", &cfg.to_string());
    let out = lab().args(["run"]).arg(&path).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let gates = std::fs::read_to_string(dir.path().join("gauge-invariance-gates.csv")).unwrap();
    assert!(gates.contains("identity_worst@129"));
}

#[test]
fn aliasing_violation_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("pairing.json")).unwrap().replace("[16, 24, 32, 48, 64]", "[16, 24, 32, 48, 200]");
    let path = write(dir.path(), "alias.json", &text);
    for sub in ["validate", "run"] {
        let out = lab().arg(sub).arg(&path).output().unwrap();
        assert_eq!(out.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&out.stderr).contains("aliasing guard"));
    }
}

#[test]
fn malformed_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "bad.json", r#"{"experiment": "spectrum-check", "cases": [{"name": "a"}]}"#);
    assert_eq!(lab().arg("validate").arg(&path).output().unwrap().status.code(), Some(2));
    let path = write(dir.path(), "unknown.json", r#"{"experiment": "spectrum-check", "tolerances": {"nope": 1}, "cases": []}"#);
    assert_eq!(lab().arg("validate").arg(&path).output().unwrap().status.code(), Some(2));
}

#[test]
fn failing_gate_exits_one_and_still_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("spectrum.json"))
        .unwrap()
        .replace(r#""output": "out/spectrum","#, r#""output": "out/spectrum", "tolerances": {"eigenvalue_rel": 1e-9},"#);
    let path = write(dir.path(), "tight.json", &text);
    let out = lab().arg("run").arg(&path).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let gates = std::fs::read_to_string(dir.path().join("spectrum-check-gates.csv")).unwrap();
    assert!(gates.lines().nth(1).unwrap().contains("false"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL interval-flat/eigenvalue_rel@513"));
}

#[test]
fn every_shipped_config_validates() {
    for entry in std::fs::read_dir(format!("{}/../../configs", env!("CARGO_MANIFEST_DIR"))).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let out = lab().arg("validate").arg(&path).output().unwrap();
            assert_eq!(out.status.code(), Some(0), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
        }
    }
}

#[test]
fn plots_are_optional_files() {
    let dir = tempfile::tempdir().unwrap();
    let status = lab().args(["run", &config("spectrum.json"), "--plots", "--out"]).arg(dir.path()).output().unwrap().status;
    assert_eq!(status.code(), Some(0));
    let svgs = std::fs::read_dir(dir.path().join("plots")).unwrap().count();
    assert!(svgs >= 1);
}
