use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn gdiode(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gdiode"))
        .args(args)
        .arg("--quiet")
        .arg("--out-dir")
        .arg(out)
        .env_remove("GDIODE_OUT_DIR")
        .output()
        .expect("spawn gdiode")
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn sweep_writes_22_points_and_a_consistent_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gdiode(&["sweep", "--svg"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let bias = column(&csv, "bias_V");
    assert_eq!(bias.len(), 22);
    assert_eq!(bias[21], -210.0);
    let shift = column(&csv, "shift_GHz");
    assert!(shift[21] < -50.0);

    let m = manifest(tmp.path());
    assert_eq!(m["status"], "ok");
    assert_eq!(m["command"], "sweep");
    assert_eq!(m["seed"], 42);
    assert!(m["calibration"]["differential_dipole_scale"].as_f64().unwrap() > 0.0);
    let files = m["files"].as_array().unwrap();
    assert!(files.iter().any(|f| f["path"] == "spectra.svg"));
    for f in files {
        let bytes = std::fs::read(tmp.path().join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, bytes.len());
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
}

#[test]
fn iv_is_rectifying() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(gdiode(&["iv"], tmp.path()).status.success());
    let csv = std::fs::read_to_string(tmp.path().join("iv.csv")).unwrap();
    let (v, i) = (column(&csv, "V_volts"), column(&csv, "I_amps"));
    let at = |x: f64| i[v.iter().position(|y| *y == x).unwrap()];
    assert!(at(20.0) > 1e3 * at(-20.0).abs());
    assert!(at(0.0).abs() < 1e-15);
}

#[test]
fn zero_bias_scan_has_negligible_photocurrent() {
    let tmp = tempfile::tempdir().unwrap();
    for bias in ["0", "-200"] {
        let out = gdiode(&["scan", "--bias", bias], tmp.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let max = |name: &str| {
        let csv = std::fs::read_to_string(tmp.path().join(name)).unwrap();
        column(&csv, "photocurrent_A").into_iter().fold(0.0f64, |a, b| a.max(b.abs()))
    };
    let (i0, i200) = (max("scan_0V.csv"), max("scan_m200V.csv"));
    assert!(i0 < 1e-3 * i200, "{i0:e} vs {i200:e}");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("scan_m200V.json")).unwrap()).unwrap();
    assert!(summary["correlation"].as_f64().unwrap() >= 0.7);
}

#[test]
fn invalid_config_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[solver]\nabsolute_tolerance = -1.0\n").unwrap();
    let out = gdiode(&["iv", "--config", cfg.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("solver"), "{err}");

    std::fs::write(&cfg, "[device]\nno_such_key = 1\n").unwrap();
    let out = gdiode(&["iv", "--config", cfg.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));
}

#[test]
fn solver_failure_dumps_residuals() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("strict.toml");
    std::fs::write(&cfg, "[solver]\nmax_outer_iterations = 1\ngummel_stall_iterations = 1\nbias_step_min = 5.0\n").unwrap();
    let out = gdiode(&["iv", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let residuals = std::fs::read_to_string(tmp.path().join("residuals.csv")).unwrap();
    assert!(residuals.starts_with("iteration,update_V\n") && residuals.lines().count() > 1);
    let m = manifest(tmp.path());
    assert_eq!(m["status"], "failed");
    assert!(m["error"].as_str().is_some());
}

#[test]
fn config_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gdiode(&["config", "--seed", "9"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = gdiode::config::RunConfig::from_toml_str(&text).unwrap();
    assert_eq!(cfg.seed(), 9);
    assert_eq!(cfg.with_seed(42), gdiode::config::RunConfig::default());
}
