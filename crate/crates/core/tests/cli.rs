use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn rodflow(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rodflow"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn aligned(dir: &Path) -> Value {
    json!({
        "command": "simulate",
        "level": 2,
        "params": {"k1": 1.0, "k2": 1.3, "k3": 0.7},
        "initial": {"body": [0.0, 0.0, 0.4, 0.0, 0.0, -0.8, 0.0, 0.0, 1.2]},
        "span": [0.0, 20.0],
        "output": {"dir": dir.join("out"), "prefix": "aligned"}
    })
}

fn generic(dir: &Path) -> Value {
    json!({
        "params": {"k1": 1.0, "k2": 1.0, "k3": 0.75},
        "initial": {
            "canonical": {
                "state": {"theta": 1.1, "psi": 0.6, "phi": 0.0, "p_theta": -0.5, "p_psi": 0.2, "p_phi": 1.0},
                "casimirs": {"c1": 1.02, "c2": 1.0, "c3": 1.0}
            }
        },
        "integrator": {"tol": 1e-11},
        "span": [0.0, 10.0],
        "output": {"dir": dir.join("out"), "prefix": "generic"}
    })
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn aligned_simulation_is_constant() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &aligned(tmp.path()));
    let out = rodflow(&["simulate", cfg.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let (header, rows) = read_csv(&tmp.path().join("out/aligned_trajectory.csv"));
    assert_eq!(header[..10], ["s", "m1", "m2", "m3", "n1", "n2", "n3", "B1", "B2", "B3"]);
    assert!(rows.len() >= 2);
    for r in &rows {
        assert_eq!(r[1..10], rows[0][1..10]);
    }
    let ledger: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("out/aligned_ledger.json")).unwrap()).unwrap();
    assert_eq!(ledger["max_drift"].as_f64().unwrap(), 0.0);
}

#[test]
fn csv_values_round_trip_losslessly() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &generic(tmp.path()));
    let out = rodflow(&["simulate", cfg.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(tmp.path().join("out/generic_trajectory.csv")).unwrap();
    for field in text.lines().skip(1).flat_map(|l| l.split(',')) {
        let v: f64 = field.parse().unwrap();
        assert_eq!(v.to_bits(), format!("{v:.16e}").parse::<f64>().unwrap().to_bits());
        assert_eq!(field, format!("{v:.16e}"));
    }
}

#[test]
fn simulate_is_bit_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &generic(tmp.path()));
    let path = tmp.path().join("out/generic_trajectory.csv");
    assert!(rodflow(&["simulate", cfg.to_str().unwrap()], tmp.path()).status.success());
    let first = fs::read(&path).unwrap();
    assert!(rodflow(&["simulate", cfg.to_str().unwrap()], tmp.path()).status.success());
    assert_eq!(first, fs::read(&path).unwrap());
}

#[test]
fn malformed_config_exits_2_with_field_path() {
    let tmp = TempDir::new().unwrap();
    let mut c = generic(tmp.path());
    c["integrator"]["tol"] = json!("tight");
    let cfg = write_config(tmp.path(), "c.json", &c);
    let out = rodflow(&["simulate", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("integrator.tol"), "{}", stderr(&out));

    let mut c = generic(tmp.path());
    c["params"]["k3"] = json!(-1.0);
    let cfg = write_config(tmp.path(), "c.json", &c);
    let out = rodflow(&["simulate", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("params"), "{}", stderr(&out));
}

#[test]
fn unknown_field_and_missing_file_exit_2() {
    let tmp = TempDir::new().unwrap();
    let mut c = generic(tmp.path());
    c["spam"] = json!(1);
    let cfg = write_config(tmp.path(), "c.json", &c);
    let out = rodflow(&["simulate", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("spam"));
    let out = rodflow(&["simulate", "no_such_file.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_tolerance_exits_2() {
    let tmp = TempDir::new().unwrap();
    let mut c = generic(tmp.path());
    c["integrator"]["tol"] = json!(0.5);
    let cfg = write_config(tmp.path(), "c.json", &c);
    assert_eq!(rodflow(&["simulate", cfg.to_str().unwrap()], tmp.path()).status.code(), Some(2));
}

#[test]
fn step_budget_exhaustion_exits_3_with_location() {
    let tmp = TempDir::new().unwrap();
    let mut c = generic(tmp.path());
    c["integrator"]["max_steps"] = json!(5);
    let cfg = write_config(tmp.path(), "c.json", &c);
    let out = rodflow(&["simulate", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("s = "), "{}", stderr(&out));
}

#[test]
fn reduce_needs_isotropy() {
    let tmp = TempDir::new().unwrap();
    let mut c = generic(tmp.path());
    c["params"]["k2"] = json!(1.3);
    let cfg = write_config(tmp.path(), "c.json", &c);
    let out = rodflow(&["reduce", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("params"));
}

#[test]
fn reduce_tracks_the_body_flow() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &generic(tmp.path()));
    let out = rodflow(&["reduce", cfg.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let (header, rows) = read_csv(&tmp.path().join("out/generic_reduced.csv"));
    assert_eq!(header, ["s", "theta", "psi", "phi", "p_theta", "p_psi", "p_phi", "H", "I"]);
    assert!(rows.len() > 10);
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("out/generic_reduce.json")).unwrap()).unwrap();
    assert!(report["body_deviation"].as_f64().unwrap() < 1e-7, "{report}");
}

#[test]
fn poincare_files_and_determinism() {
    let tmp = TempDir::new().unwrap();
    let c = json!({
        "command": "poincare",
        "params": {"k1": 1.0, "k2": 1.0, "k3": 0.75},
        "integrator": {"tol": 1e-11},
        "section": {"alpha": 0.5, "direction": "both", "max_crossings": 1000, "max_arclength": 60.0},
        "level_set": {
            "hamiltonian": 1.5, "integral": 1.00995,
            "casimirs": {"c1": 1.02, "c2": 1.0, "c3": 1.0},
            "p_phi": 1.0, "n_seeds": 2
        },
        "output": {"dir": tmp.path().join("out"), "prefix": "sec"},
        "rng_seed": 7
    });
    let cfg = write_config(tmp.path(), "c.json", &c);
    let csv = tmp.path().join("out/sec_sections.csv");
    let out = rodflow(&["poincare", cfg.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let (header, rows) = read_csv(&csv);
    assert_eq!(header, ["orbit_id", "s", "theta", "p_theta", "residual"]);
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[4].abs() < 1e-9));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("out/sec_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["rng_seed"], 7);
    let first = fs::read(&csv).unwrap();
    assert!(rodflow(&["poincare", cfg.to_str().unwrap()], tmp.path()).status.success());
    assert_eq!(first, fs::read(&csv).unwrap());
}

#[test]
fn poincare_empty_section() {
    let tmp = TempDir::new().unwrap();
    let c = json!({
        "params": {"k1": 1.0, "k2": 1.0, "k3": 0.75},
        "section": {"alpha": 0.5, "direction": "both", "max_crossings": 10, "max_arclength": 1e-3},
        "level_set": {
            "hamiltonian": 1.5, "integral": 1.00995,
            "casimirs": {"c1": 1.02, "c2": 1.0, "c3": 1.0},
            "p_phi": 1.0, "n_seeds": 1
        },
        "output": {"dir": tmp.path().join("out"), "prefix": "empty"}
    });
    let cfg = write_config(tmp.path(), "c.json", &c);
    let out = rodflow(&["poincare", cfg.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let (_, rows) = read_csv(&tmp.path().join("out/empty_sections.csv"));
    assert!(rows.is_empty());
}

#[test]
fn lax_check_report() {
    let tmp = TempDir::new().unwrap();
    let c = json!({
        "params": {"k1": 1.3, "k2": 1.3, "k3": 0.8},
        "initial": {"body": [0.3, -0.2, 0.5, 0.1, 0.4, -0.3, 0.2, 0.6, 1.1, -0.4, 0.3, 0.2]},
        "integrator": {"tol": 1e-12},
        "span": [0.0, 5.0],
        "output": {"dir": tmp.path().join("out"), "prefix": "lax"}
    });
    let cfg = write_config(tmp.path(), "c.json", &c);
    let out = rodflow(&["lax-check", cfg.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let r: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("out/lax_lax.json")).unwrap()).unwrap();
    assert!(r["coefficient_defect"].as_f64().unwrap() < 1e-13);
    assert!(r["isospectral_drift"].as_f64().unwrap() < 1e-8);
}

#[test]
fn verify_suite_report() {
    let tmp = TempDir::new().unwrap();
    let report = tmp.path().join("r.json");
    let out = rodflow(&["verify", "roundtrip", "--out", report.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let text = r.to_string();
    assert!(text.contains("\"passed\":true"), "{text}");
}

#[test]
fn verify_unknown_suite_exits_2() {
    let tmp = TempDir::new().unwrap();
    let out = rodflow(&["verify", "bogus"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn command_mismatch_exits_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &aligned(tmp.path()));
    let out = rodflow(&["lax-check", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("command"));
}
