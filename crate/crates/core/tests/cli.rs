//! End-to-end tests of the `eqnav` binary.

use std::path::Path;
use std::process::{Command, Output};

fn eqnav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eqnav")).args(args).env("EQNAV_LOG", "warn").output().expect("binary runs")
}

fn dir_arg(d: &Path) -> String {
    d.display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary_value(out: &str, key: &str) -> f64 {
    let line = out.lines().find(|l| l.starts_with(key)).unwrap_or_else(|| panic!("{key} missing from\n{out}"));
    line.split_whitespace().nth(1).unwrap().parse().unwrap()
}

const NOISE_FREE: [&str; 10] =
    ["--set", "sim.gyro_psd=0", "--set", "sim.accel_psd=0", "--set", "sim.gyro_bias=0,0,0", "--set", "sim.accel_bias=0,0,0", "--set", "sim.gnss_sigma=1e-6"];

#[test]
fn noise_free_roundtrip_recovers_truth() {
    let d = tempfile::tempdir().unwrap();
    let out = dir_arg(d.path());
    let mut sim = vec!["simulate", "--out", &out];
    sim.extend(NOISE_FREE);
    assert!(eqnav(&sim).status.success());
    for conv in ["left", "right"] {
        let o = eqnav(&["run", "--out", &out, "--convention", conv]);
        assert!(o.status.success(), "{}", stderr(&o));
        let s = stdout(&o);
        assert!(summary_value(&s, "rms_pos_m") <= 1e-5, "{conv}\n{s}");
        assert!(summary_value(&s, "rms_att_rad") <= 1e-6, "{conv}\n{s}");
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = dir_arg(d.path());
        assert!(eqnav(&["simulate", "--out", &out, "--seed", "7", "--set", "sim.duration=20"]).status.success());
        assert!(eqnav(&["run", "--out", &out, "--seed", "7"]).status.success());
    }
    for f in ["imu.csv", "gnss.csv", "truth.csv", "nav_out.csv", "err_out.csv", "summary.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
    let c = tempfile::tempdir().unwrap();
    let out = dir_arg(c.path());
    assert!(eqnav(&["simulate", "--out", &out, "--seed", "8", "--set", "sim.duration=20"]).status.success());
    assert_ne!(std::fs::read(a.path().join("imu.csv")).unwrap(), std::fs::read(c.path().join("imu.csv")).unwrap());
}

#[test]
fn static_scenario_has_rate_times_duration_rows() {
    let d = tempfile::tempdir().unwrap();
    assert!(eqnav(&["simulate", "--out", &dir_arg(d.path()), "--scenario", "static"]).status.success());
    let text = std::fs::read_to_string(d.path().join("imu.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,gx,gy,gz,ax,ay,az"));
    assert_eq!(lines.count(), 12000);
    let gnss = std::fs::read_to_string(d.path().join("gnss.csv")).unwrap();
    assert_eq!(gnss.lines().next(), Some("t,x,y,z,sxx,syy,szz,sxy,sxz,syz"));
    let truth = std::fs::read_to_string(d.path().join("truth.csv")).unwrap();
    assert_eq!(truth.lines().next().unwrap().split(',').count(), 16);
}

#[test]
fn run_without_truth_omits_err_out_and_keeps_nis() {
    let d = tempfile::tempdir().unwrap();
    let out = dir_arg(d.path());
    assert!(eqnav(&["simulate", "--out", &out, "--set", "sim.duration=10"]).status.success());
    std::fs::remove_file(d.path().join("truth.csv")).unwrap();
    let o = eqnav(&["run", "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!d.path().join("err_out.csv").exists());
    let s = stdout(&o);
    assert!(s.contains("rms_pos_m     n/a"), "{s}");
    assert!(summary_value(&s, "mean_nis").is_finite());
    let nav = std::fs::read_to_string(d.path().join("nav_out.csv")).unwrap();
    let with_nis = nav.lines().skip(1).filter(|l| !l.ends_with(',')).count();
    assert_eq!(with_nis, 10);
}

#[test]
fn corrupt_row_cites_file_and_line() {
    let d = tempfile::tempdir().unwrap();
    let out = dir_arg(d.path());
    assert!(eqnav(&["simulate", "--out", &out, "--set", "sim.duration=2"]).status.success());
    let path = d.path().join("imu.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[5] = lines[5].replacen(',', ",oops", 1);
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    let o = eqnav(&["run", "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains(&format!("{}:6:", path.display())), "{e}");
}

#[test]
fn missing_output_dir_is_named() {
    let d = tempfile::tempdir().unwrap();
    let missing = d.path().join("does-not-exist");
    let o = eqnav(&["simulate", "--out", &dir_arg(&missing)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(&dir_arg(&missing)), "{}", stderr(&o));
}

#[test]
fn config_file_keys_and_precedence() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("nav.cfg");
    std::fs::write(&cfg, "scenario = static\nsim.duration = 1\n# comment\nsim.imu_rate = 50\n").unwrap();
    let out = dir_arg(d.path());
    let cfg_s = dir_arg(&cfg);
    let o = eqnav(&["simulate", "--config", &cfg_s, "--out", &out, "--set", "sim.imu_rate=100"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(d.path().join("imu.csv")).unwrap().lines().count(), 101);

    std::fs::write(&cfg, "seed = 3\nsim.bogus = 1\n").unwrap();
    let o = eqnav(&["simulate", "--config", &cfg_s, "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(&format!("{cfg_s}:2: sim.bogus: unknown key")), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(eqnav(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(eqnav(&["run", "--convention", "sideways"]).status.code(), Some(2));
    assert_eq!(eqnav(&["run", "--seed", "minus-one"]).status.code(), Some(2));
}

#[test]
fn verify_negative_control_fails_phi_check() {
    let d = tempfile::tempdir().unwrap();
    let out = dir_arg(d.path());
    let o = eqnav(&["verify", "--out", &out, "--set", "tol.phi_right_rk4=1e-15", "--set", "tol.samples=100"]);
    assert_eq!(o.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let checks = report["checks"].as_array().unwrap();
    let phi = checks.iter().find(|c| c["name"] == "phi_right_rk4").unwrap();
    assert_eq!(phi["passed"], false);
    assert!(phi["max_residual"].as_f64().unwrap() > 1e-15);
    let names: Vec<&str> = checks.iter().map(|c| c["name"].as_str().unwrap()).collect();
    let mut unique = names.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), names.len());
    assert!(checks.iter().all(|c| c["max_residual"].is_number() || c["max_residual"].is_null()));
    assert!(stderr(&o).contains("FAIL phi_right_rk4"));
    assert!(d.path().join("verify.json").exists());
}

#[test]
fn observability_reports_rank() {
    let o = eqnav(&["observability", "--scenario", "static", "--set", "obs.epochs=5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    let rank: usize = s.lines().find(|l| l.starts_with("rank")).unwrap().split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(rank < 15, "{s}");
    assert!(s.contains("angle to gravity"), "{s}");
}

#[test]
fn monte_carlo_run_writes_summary() {
    let d = tempfile::tempdir().unwrap();
    let o = eqnav(&["run", "--out", &dir_arg(d.path()), "--set", "mc.runs=3", "--set", "sim.duration=20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mc: serde_json::Value = serde_json::from_slice(&std::fs::read(d.path().join("mc_summary.json")).unwrap()).unwrap();
    assert_eq!(mc["runs"], 3);
    assert!(mc["mean_nis"].as_f64().unwrap() > 0.0);
}
