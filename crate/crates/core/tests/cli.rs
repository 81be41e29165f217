use std::path::Path;
use std::process::Command;

use cranrates::channel::SystemConfig;
use cranrates::experiments::{run_sweep, write_records_csv, Scheme, SweepAxis, SweepSpec};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cranrates"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn spec(trials: usize, seed: u64) -> SweepSpec {
    let mut base = SystemConfig::new(3, 2, 1.0, 1.0);
    base.trials = trials;
    base.seed = seed;
    SweepSpec {
        base,
        snr_db: 5.0,
        backhaul: 0.0,
        axis: SweepAxis::Backhaul,
        values: vec![0.0, 1.0, 2.0, 3.0, 4.0],
        schemes: vec![Scheme::Qcof, Scheme::Swz, Scheme::Cutset],
    }
}

fn csv(spec: &SweepSpec, workers: usize) -> Vec<u8> {
    let r = run_sweep(spec, workers).unwrap();
    let mut out = Vec::new();
    write_records_csv(&mut out, &r.records).unwrap();
    out
}

#[test]
fn sweep_record_count_and_order() {
    let r = run_sweep(&spec(10, 42), 2).unwrap();
    assert_eq!(r.records.len(), 150);
    assert_eq!(r.aggregates.len(), 15);
    assert!(r.bound_violations.is_empty());
    assert!(r.records.iter().all(|x| x.sum_rate.is_finite() && x.sum_rate >= 0.0));
    let first: Vec<_> = r.records[..10].iter().map(|x| (x.scheme, x.trial)).collect();
    assert_eq!(first, (0..10).map(|t| (Scheme::Qcof, t)).collect::<Vec<_>>());
    assert_eq!(r.records[10].scheme, Scheme::Swz);
    assert_eq!(r.records[30].backhaul, 1.0);
}

#[test]
fn sweep_is_deterministic() {
    let s = spec(6, 42);
    let a = csv(&s, 1);
    assert_eq!(a, csv(&s, 1));
    assert_eq!(a, csv(&s, 3));
    assert_ne!(a, csv(&spec(6, 43), 1));
}

#[test]
fn sweep_cli_writes_csv_and_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let status = bin()
        .args(["sweep", "--axis", "snr-db", "--values", "0:10:5", "--backhaul", "2", "--trials", "3"])
        .args(["--schemes", "swz,cutset", "--seed", "9", "--workers", "2", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let raw = std::fs::read_to_string(&out).unwrap();
    let mut lines = raw.lines();
    assert_eq!(lines.next().unwrap(), "scheme,search,L,K,snr_db,C,trial,sum_rate");
    assert_eq!(lines.count(), 3 * 2 * 3);
    let agg = std::fs::read_to_string(dir.path().join("run.agg.csv")).unwrap();
    assert!(agg.starts_with("scheme,search,L,K,snr_db,C,mean_sum_rate,stderr,trials\n"));
    assert_eq!(agg.lines().count(), 1 + 3 * 2);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 9);
    assert_eq!(meta["allocation"], "prop1");
    assert!(meta["rng"].as_str().unwrap().contains("ChaCha20"));
    assert!(meta["version"].is_string());
    assert_eq!(meta["epsilon"], 1e-6);
}

#[test]
fn sweep_cli_json_format() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.json");
    let status = bin()
        .args(["sweep", "--axis", "backhaul", "--values", "1,2", "--snr-db", "5", "--trials", "2"])
        .args(["--schemes", "qcof,cof", "--search", "lll", "--format", "json", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["records"].as_array().unwrap().len(), 8);
    assert_eq!(v["records"][0]["search"], "lll");
    assert_eq!(v["records"][2]["search"], "none");
}

#[test]
fn sweep_cli_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    for args in [
        vec!["--axis", "backhaul", "--values", "2,1", "--snr-db", "5"],
        vec!["--axis", "backhaul", "--values", "1,2"],
        vec!["--axis", "volume", "--values", "1,2", "--snr-db", "5"],
        vec!["--axis", "backhaul", "--values", "1", "--snr-db", "5", "--trials", "0"],
    ] {
        let o = bin().arg("sweep").args(&args).arg("--out").arg(&out).output().unwrap();
        assert!(!o.status.success(), "{args:?}");
    }
}

#[test]
fn eval_cutset_identity() {
    let dir = tempfile::tempdir().unwrap();
    let ch = write(dir.path(), "h.json", r#"{"L": 2, "K": 2, "H": [[1, 0], [0, 1]]}"#);
    let snr_db = format!("{}", 10.0 * 3f64.log10());
    let o = bin()
        .args(["eval", "--snr-db", &snr_db, "--backhaul", "1,1", "--schemes", "cutset", "--channel"])
        .arg(&ch)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rate = v["schemes"][0]["sum_rate"].as_f64().unwrap();
    assert!((rate - 2.0).abs() < 1e-9, "{rate}");
}

#[test]
fn eval_reports_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let ch = write(
        dir.path(),
        "h.json",
        r#"{"L": 3, "K": 2, "H": [[0.9, -0.4, 1.2], [0.1, 1.5, -0.7]]}"#,
    );
    let out = dir.path().join("report.json");
    let status = bin()
        .args(["eval", "--snr-db", "5", "--backhaul", "2,2.5", "--users", "3", "--relays", "2", "--channel"])
        .arg(&ch)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let schemes = v["schemes"].as_array().unwrap();
    assert_eq!(schemes.len(), 5);
    assert_eq!(schemes[0]["scheme"], "qcof");
    assert_eq!(schemes[0]["evaluation"]["sigma"].as_array().unwrap().len(), 2);
    assert_eq!(schemes[0]["evaluation"]["g_diag"].as_array().unwrap().len(), 3);
    assert_eq!(schemes[1]["evaluation"]["relays"][0]["eta"].as_array().unwrap().len(), 2);
    let cut = schemes[4]["sum_rate"].as_f64().unwrap();
    for s in schemes {
        assert!(s["sum_rate"].as_f64().unwrap() <= cut + 1e-9);
    }
}

#[test]
fn eval_malformed_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("bad.json", "{ not json"),
        ("ragged.json", r#"{"L": 2, "K": 2, "H": [[1, 0], [0]]}"#),
        ("shape.json", r#"{"L": 3, "K": 2, "H": [[1, 0], [0, 1]]}"#),
    ] {
        let ch = write(dir.path(), name, text);
        let o = bin()
            .args(["eval", "--snr-db", "5", "--backhaul", "1,1", "--channel"])
            .arg(&ch)
            .output()
            .unwrap();
        assert!(!o.status.success(), "{name}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains("malformed channel file"), "{name}: {err}");
    }
    let o = bin()
        .args(["eval", "--snr-db", "5", "--backhaul", "1,1", "--channel"])
        .arg(dir.path().join("missing.json"))
        .output()
        .unwrap();
    assert!(!o.status.success());
}

#[test]
fn eval_dimension_mismatch_fails() {
    let dir = tempfile::tempdir().unwrap();
    let ch = write(dir.path(), "h.json", r#"{"L": 2, "K": 2, "H": [[1, 0], [0, 1]]}"#);
    let o = bin()
        .args(["eval", "--snr-db", "5", "--backhaul", "1,1", "--users", "3", "--channel"])
        .arg(&ch)
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("dimension mismatch"));
    let o = bin()
        .args(["eval", "--snr-db", "5", "--backhaul", "1,1,1", "--channel"])
        .arg(&ch)
        .output()
        .unwrap();
    assert!(!o.status.success());
}
