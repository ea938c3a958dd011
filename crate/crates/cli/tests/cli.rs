use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn twolevel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twolevel"))
        .env("SOURCE_DATE_EPOCH", "0")
        .args(args)
        .output()
        .unwrap()
}

fn ok_stdout(args: &[&str]) -> String {
    let out = twolevel(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok_stdout(args)).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn steady_reports_reference_point() {
    let v = json(&["steady", "--J", "63.2"]);
    assert!((v["m"].as_f64().unwrap() - 10.0).abs() < 1e-12);
    assert_eq!(v["saturated"], false);
}

#[test]
fn invalid_parameters_exit_with_status_two() {
    for args in [
        &["steady", "--J", "1", "--alpha", "-1"][..],
        &["steady", "--J", "1", "--N", "2.5"],
        &["fano", "--J", "1", "--xi", "1.5"],
        &["spectrum", "--J", "0"],
        &["sweep", "--J", "1", "--j-points", "0"],
    ] {
        let out = twolevel(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn fractional_xi_cannot_be_simulated() {
    let tmp = tempfile::tempdir().unwrap();
    let out = twolevel(&["simulate", "--J", "10", "--xi", "0.5", "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("xi"));
}

#[test]
fn spectrum_endpoints() {
    let csv = ok_stdout(&["spectrum", "--J", "63.2", "--xi", "0", "--omega-min", "1e-4", "--omega-max", "1e7", "--points", "5"]);
    let rows: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[0].1 < 1e-6);
    assert!((rows[4].1 - 1.0).abs() < 1e-6);
}

#[test]
fn spectrum_peak_goes_to_its_own_file() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    ok_stdout(&["spectrum", "--J", "10", "--peak", "--out-dir", dir]);
    let peak = read_json(&tmp.path().join("peak.json"));
    assert!(peak["s_max"].as_f64().unwrap() > 1.0);
    assert!(tmp.path().join("spectrum.csv").exists());
}

#[test]
fn fano_high_pump_limits() {
    for (xi, target) in [("1", 1.0), ("0", 0.5)] {
        let v = json(&["fano", "--J", "63200", "--xi", xi]);
        let f = v["fano_closed_form"].as_f64().unwrap();
        assert!((f - target).abs() / target < 0.01, "xi {xi}: {f}");
        assert!(v["relative_difference"].as_f64().unwrap() < 1e-8);
    }
}

#[test]
fn seeded_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let dir = tmp.path().join(name);
        ok_stdout(&["simulate", "--J", "20", "--duration", "200", "--seed", "42", "--out-dir", dir.to_str().unwrap()]);
        ["samples.csv", "detections.csv", "metadata.json"].map(|f| std::fs::read(dir.join(f)).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn manifest_round_trips_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok_stdout(&["simulate", "--J", "12.5", "--gamma", "3", "--N", "500", "--duration", "100", "--seed", "7", "--out-dir", dir.to_str().unwrap()]);
    let manifest = read_json(&dir.join("manifest.json"));
    let params: twolevel_core::LaserParams = serde_json::from_value(manifest["params"].clone()).unwrap();
    assert_eq!(params, twolevel_core::LaserParams::new(500.0, 6.32, 3.0, 12.5, 1.0).unwrap());
    let config: twolevel_core::SimConfig = serde_json::from_value(manifest["config"].clone()).unwrap();
    assert_eq!(config.seed, 7);
    assert_eq!(manifest["timestamp"], 0);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);
}

#[test]
fn config_file_and_flags_combine() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"J": 63.2, "alpha": 1.0}"#).unwrap();
    let v = json(&["steady", "--config", cfg.to_str().unwrap(), "--alpha", "6.32"]);
    assert!((v["m"].as_f64().unwrap() - 10.0).abs() < 1e-12);

    std::fs::write(&cfg, r#"{"J": 1, "bogus": 2}"#).unwrap();
    assert_eq!(twolevel(&["steady", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn regular_pump_arrivals_are_counted_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let v = json(&[
        "simulate", "--J", "63.2", "--xi", "0", "--duration", "100", "--burn-in", "0", "--seed", "1", "--out-dir",
        tmp.path().to_str().unwrap(),
    ]);
    let pumps = v["event_counts"]["pump"].as_i64().unwrap();
    assert!((pumps - 6320).abs() <= 1, "{pumps}");
}

#[test]
fn estimates_are_written_on_request() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let v = json(&["simulate", "--J", "63.2", "--duration", "1000", "--seed", "3", "--estimate", "--out-dir", dir.to_str().unwrap()]);
    let m = &v["estimates"]["mean_photon"];
    assert!((m["value"].as_f64().unwrap() - 10.0).abs() < 5.0 * m["std_error"].as_f64().unwrap());
    let psd = std::fs::read_to_string(dir.join("psd.csv")).unwrap();
    assert!(psd.starts_with("omega,value,std_error\n"));
}

#[test]
fn compare_gates_on_z_scores() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = twolevel(&["compare", "--J", "632", "--duration", "500", "--seed", "9", "--out-dir", dir.to_str().unwrap()]);
    let report = read_json(&dir.join("compare.json"));
    let passed = report["passed"].as_bool().unwrap();
    assert_eq!(out.status.code(), Some(if passed { 0 } else { 3 }));
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows[0]["quantity"], "mean_photon");
    let analytic_m = rows[0]["analytic"].as_f64().unwrap();
    let steady = json(&["steady", "--J", "632"]);
    assert_eq!(analytic_m, steady["m"].as_f64().unwrap());
    assert_eq!(twolevel(&["compare", "--J", "0"]).status.code(), Some(2));
}

#[test]
fn single_point_sweep_matches_other_commands() {
    let csv = ok_stdout(&["sweep", "--J", "1", "--gamma", "6.32", "--j-min", "40", "--j-max", "40", "--j-points", "1"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "J,gamma,m,F,S_max,omega_star");
    assert_eq!(lines.len(), 2);
    let cols: Vec<f64> = lines[1].split(',').map(|c| c.parse().unwrap()).collect();
    let steady = json(&["steady", "--J", "40", "--gamma", "6.32"]);
    let fano = json(&["fano", "--J", "40", "--gamma", "6.32"]);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    assert!(rel(cols[2], steady["m"].as_f64().unwrap()) < 1e-10);
    assert!(rel(cols[3], fano["fano_closed_form"].as_f64().unwrap()) < 1e-10);
}

#[test]
fn standard_gamma_set_orders_rows() {
    let csv = ok_stdout(&["sweep", "--J", "1", "--gamma-set", "standard", "--j-min", "1", "--j-max", "100", "--j-points", "3"]);
    let gammas: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(gammas.len(), 15);
    assert!(gammas.windows(2).all(|w| w[0] <= w[1]));
}
