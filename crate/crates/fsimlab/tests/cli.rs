use std::path::{Path, PathBuf};
use std::process::Command;

use fsimlab::cli::{Manifest, RunStatus, MANIFEST_FILE};

const BIN: &str = env!("CARGO_BIN_EXE_fsimlab");

const BENCH_CONFIG: &str = r#"{
  "shots": 500,
  "xeb": {"gate": {"kind": "ideal", "theta_deg": 90, "phi_deg": 30, "depolarizing": 0.005},
          "depths": [5, 10, 20, 40], "circuits_per_depth": 4},
  "purity": {"gate": {"kind": "ideal", "theta_deg": 90, "phi_deg": 30, "depolarizing": 0.005},
             "depths": [5, 10, 20, 40], "circuits_per_depth": 4}
}"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn fsimlab(args: &[&str], env_seed: Option<&str>) -> std::process::Output {
    let mut c = Command::new(BIN);
    c.args(args).env_remove("FSIMLAB_SEED");
    if let Some(s) = env_seed {
        c.env("FSIMLAB_SEED", s);
    }
    c.output().unwrap()
}

fn manifest(dir: &Path) -> Manifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap()).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn reruns_are_byte_identical() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(t.path(), "c.json", BENCH_CONFIG);
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    for d in [&a, &b] {
        let o = fsimlab(&["xeb", "--config", path(&cfg), "--out", path(d)], None);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["xeb.json", "xeb_points.csv"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
    assert_eq!(manifest(&a).config_hash, manifest(&b).config_hash);
}

#[test]
fn seed_priority_is_flag_then_env_then_config() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(t.path(), "c.json", BENCH_CONFIG);
    let run = |name: &str, extra: &[&str], env: Option<&str>| {
        let d = t.path().join(name);
        let mut args = vec!["rb", "--config", path(&cfg), "--out", path(&d)];
        args.extend_from_slice(extra);
        let o = fsimlab(&args, env);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        manifest(&d).seed
    };
    assert_eq!(run("plain", &[], None), 1);
    assert_eq!(run("env", &[], Some("77")), 77);
    assert_eq!(run("flag", &["--seed", "5"], Some("77")), 5);
}

#[test]
fn bad_seed_in_environment_is_an_error() {
    let o = fsimlab(&["rb"], Some("not-a-number"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FSIMLAB_SEED"));
}

#[test]
fn every_output_carries_seed_and_hash() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(t.path(), "c.json", BENCH_CONFIG);
    let d = t.path().join("out");
    assert!(fsimlab(&["purity", "--config", path(&cfg), "--out", path(&d), "--seed", "9"], None).status.success());
    let m = manifest(&d);
    assert_eq!(m.status, RunStatus::Ok);
    for f in &m.outputs {
        let text = read(&d, f);
        if f.ends_with(".csv") {
            let mut r = csv::Reader::from_reader(text.as_bytes());
            let h = r.headers().unwrap().clone();
            let (si, hi) = (h.iter().position(|c| c == "seed").unwrap(), h.iter().position(|c| c == "config_hash").unwrap());
            for row in r.records() {
                let row = row.unwrap();
                assert_eq!(&row[si], "9");
                assert_eq!(&row[hi], m.config_hash);
            }
        } else {
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v["seed"], 9);
            assert_eq!(v["config_hash"], m.config_hash.as_str());
        }
    }
}

#[test]
fn manifest_reruns_the_same_experiment() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(t.path(), "c.json", BENCH_CONFIG);
    let a = t.path().join("a");
    assert!(fsimlab(&["xeb", "--config", path(&cfg), "--out", path(&a)], Some("31")).status.success());
    let b = t.path().join("b");
    let from_manifest = a.join(MANIFEST_FILE);
    assert!(fsimlab(&["xeb", "--config", path(&from_manifest), "--out", path(&b)], None).status.success());
    assert_eq!(manifest(&b).seed, 31);
    assert_eq!(read(&a, "xeb.json"), read(&b, "xeb.json"));
}

#[test]
fn unknown_config_field_is_rejected() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(t.path(), "c.json", r#"{"shotz": 5}"#);
    let o = fsimlab(&["rb", "--config", path(&cfg)], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("shotz"));
}

#[test]
fn report_merges_xeb_and_purity_by_gate() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(t.path(), "c.json", BENCH_CONFIG);
    let (x, p, r) = (t.path().join("x"), t.path().join("p"), t.path().join("r"));
    assert!(fsimlab(&["xeb", "--config", path(&cfg), "--out", path(&x)], None).status.success());
    assert!(fsimlab(&["purity", "--config", path(&cfg), "--out", path(&p)], None).status.success());
    let o = fsimlab(&["report", path(&x.join("xeb.json")), path(&p.join("purity.json")), "--out", path(&r)], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&read(&r, "report.json")).unwrap();
    let gates = v["data"]["gates"].as_array().unwrap();
    assert_eq!(gates.len(), 1);
    assert!(gates[0]["xeb_cycle"].is_number() && gates[0]["purity_cycle"].is_number() && gates[0]["coherent"].is_number());
    assert_eq!(v["data"]["sources"].as_array().unwrap().len(), 2);
}

#[test]
fn report_with_no_inputs_is_empty() {
    let t = tempfile::tempdir().unwrap();
    let r = t.path().join("r");
    let o = fsimlab(&["report", "--out", path(&r)], None);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&read(&r, "report.json")).unwrap();
    assert!(v["data"]["gates"].as_array().unwrap().is_empty());
}

#[test]
fn report_lists_files_with_the_wrong_schema() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(t.path(), "c.json", BENCH_CONFIG);
    let x = t.path().join("x");
    assert!(fsimlab(&["xeb", "--config", path(&cfg), "--out", path(&x)], None).status.success());
    let bad = write(t.path(), "bad.json", r#"{"schema": "something/else", "data": []}"#);
    let o = fsimlab(&["report", path(&x.join("xeb.json")), path(&bad), path(&x.join(MANIFEST_FILE))], None);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json") && err.contains(MANIFEST_FILE) && !err.contains("xeb.json"), "{err}");
}

#[test]
fn unconverged_targets_make_a_partial_run() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(
        t.path(),
        "c.json",
        r#"{"expectation": true,
            "calibrate": {"targets": {"list": [[45, 90], [0, 0]]},
                          "composite": {"tolerance_deg": 1e-9, "max_iterations": 1}}}"#,
    );
    let d = t.path().join("cal");
    let o = fsimlab(&["calibrate", "fsim", "--config", path(&cfg), "--out", path(&d)], None);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&d);
    assert_eq!(m.status, RunStatus::Partial);
    assert!(m.failed.iter().any(|f| f.cell.contains("theta=45")));
    for f in ["registry.json", "convergence.csv", "cphase_registry.csv", "cphase_curve.csv", "iswap_curve.csv"] {
        assert!(m.outputs.iter().any(|o| o == f), "{f}");
    }
    let reg = fsimlab::calibration::GateRegistry::load(&d.join("registry.json")).unwrap();
    assert_eq!(reg.provenance.unwrap().config_hash, m.config_hash);
}

#[test]
fn tomography_of_an_ideal_gate_is_refused() {
    let t = tempfile::tempdir().unwrap();
    let o = fsimlab(&["tomography", "--out", path(&t.path().join("o"))], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tomography"));
}

#[test]
fn pulse_tomography_reports_fsim_angles() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(
        t.path(),
        "c.json",
        r#"{"expectation": true, "noise": false, "realism": {"settling": false, "quantization": false},
            "tomography": {"gate": {"kind": "pulse", "delta_mhz": 0, "g_mhz": -20, "duration_ns": 12.5}}}"#,
    );
    let d = t.path().join("o");
    assert!(fsimlab(&["tomography", "--config", path(&cfg), "--out", path(&d)], None).status.success());
    let text = read(&d, "tomography.csv");
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let row = r.records().next().unwrap().unwrap();
    let theta: f64 = row[1].parse().unwrap();
    // On resonance a swap rate of g for 12.5 ns turns by 2π·g·t = 90°.
    assert!((theta - 90.0).abs() < 3.0, "{theta}");
}
