//! The four subcommands.

use std::path::Path;

use serde::Serialize;

use crate::errordyn::Biases;
use crate::filter::{self, gravity_axis, monte_carlo, summarize, FilterState, RunSummary, TruthTrack};
use crate::liegroup::Mat3;
use crate::par::ExecMode;
use crate::sim::{generate_truth, synthesize_gnss, synthesize_imu, Profile};
use crate::verify::{observability_along, run_suite};

use super::config::RunConfig;
use super::csvio::{self, require_dir};
use super::CliError;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes") + "\n";
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Truth, IMU and GNSS files for the configured scenario. Sensor noise is
/// seeded with `seed`, GNSS noise with `seed + 1`.
pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    require_dir(&cfg.out)?;
    let earth = cfg.earth();
    let sc = &cfg.scenario;
    let truth = generate_truth(&sc.trajectory, &earth)?;
    let imu = synthesize_imu(&Profile::new(sc.trajectory, earth)?, &sc.sensor)?;
    let cov = Mat3::identity() * sc.gnss_sigma.powi(2);
    let gnss = synthesize_gnss(&truth, &sc.lever, sc.trajectory.gnss_rate, &cov, cfg.seed.wrapping_add(1))?;
    csvio::write_imu(&cfg.out.join("imu.csv"), &imu)?;
    csvio::write_gnss(&cfg.out.join("gnss.csv"), &gnss)?;
    csvio::write_truth(&cfg.out.join("truth.csv"), &truth)?;
    println!("scenario {}: {} IMU samples, {} GNSS fixes, {} truth states in {}", cfg.scenario_name, imu.len(), gnss.len(), truth.len(), cfg.out.display());
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6e}"))
}

fn print_summary(s: &RunSummary) {
    println!("epochs        {}", s.epochs);
    println!("updates       {}", s.updates);
    println!("rms_pos_m     {}", opt(s.rms_pos));
    println!("rms_vel_mps   {}", opt(s.rms_vel));
    println!("rms_att_rad   {}", opt(s.rms_att));
    println!("rms_horiz_m   {}", opt(s.rms_horizontal));
    println!("mean_nees     {}", opt(s.mean_nees));
    println!("mean_nis      {}", opt(s.mean_nis));
}

/// Filters the CSV input in `input`, or runs `mc.runs` Monte Carlo
/// repetitions of the scenario when that is positive.
pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    require_dir(&cfg.out)?;
    if cfg.mc_runs > 0 {
        return run_monte_carlo(cfg);
    }
    let imu = csvio::read_imu(&cfg.input.join("imu.csv"))?;
    let gnss = csvio::read_gnss(&cfg.input.join("gnss.csv"))?;
    let truth_path = cfg.input.join("truth.csv");
    let truth = if truth_path.exists() { Some(csvio::read_truth(&truth_path)?) } else { None };
    // the estimate starts at the first truth state, else at the scenario start
    let (t0, x0) = match truth.as_ref().and_then(|t| t.first()) {
        Some(&(t, x)) => (t, x),
        None => {
            let p = Profile::new(cfg.scenario.trajectory, cfg.earth())?.at(0.0);
            (p.t, p.x)
        }
    };
    let conv = cfg.convention;
    let init = FilterState::new(x0, Biases::default(), cfg.initial().covariance(conv, &x0), t0, conv)?;
    // truth files carry no biases, so NEES covers the nine navigation states
    let track = truth.map(|states| TruthTrack { states, biases: None });
    let records = filter::run(&init, &imu, &gnss, &cfg.filter, track.as_ref())?;
    csvio::write_nav(&cfg.out.join("nav_out.csv"), &records)?;
    let err_path = cfg.out.join("err_out.csv");
    if track.is_some() {
        csvio::write_err(&err_path, &records)?;
    } else if err_path.exists() {
        log::info!("removing stale {} (no truth input)", err_path.display());
        std::fs::remove_file(&err_path).map_err(|source| CliError::Io { path: err_path.clone(), source })?;
    }
    let summary = summarize(&records, track.as_ref(), &cfg.earth(), cfg.filter.gnss_slop);
    write_json(&cfg.out.join("summary.json"), &summary)?;
    println!("convention    {conv}");
    print_summary(&summary);
    Ok(())
}

fn run_monte_carlo(cfg: &RunConfig) -> Result<(), CliError> {
    let mc = monte_carlo(&cfg.scenario, &cfg.filter, cfg.mc_runs, cfg.seed, ExecMode::Parallel)?;
    write_json(&cfg.out.join("mc_summary.json"), &mc)?;
    println!("scenario      {}", cfg.scenario_name);
    println!("convention    {}", cfg.convention);
    println!("runs          {}", mc.runs);
    println!("mean_nees     {:.6e}", mc.mean_nees);
    println!("mean_nis      {:.6e}", mc.mean_nis);
    println!("rms_horiz_m   {:.6e}", mc.rms_horizontal);
    Ok(())
}

/// JSON report on stdout, one PASS/FAIL line per check on stderr.
pub fn verify(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.out_given {
        require_dir(&cfg.out)?;
    }
    let report = run_suite(&cfg.tolerances, cfg.seed, &cfg.earth(), ExecMode::Parallel)?;
    for c in &report.checks {
        eprintln!("{}", c.line());
    }
    println!("{}", report.to_json());
    if cfg.out_given {
        write_json(&cfg.out.join("verify.json"), &report)?;
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::VerifyFailed { failed, total: report.checks.len() });
    }
    Ok(())
}

#[derive(Serialize)]
struct ObservabilitySummary<'a> {
    scenario: &'a str,
    convention: String,
    epochs: usize,
    rows: usize,
    rank: usize,
    rank_tol: f64,
    singular_values: &'a [f64],
    /// Angle of each null direction's attitude part to the gravity axis, rad
    null_gravity_angles: Vec<Option<f64>>,
}

pub fn observability(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.out_given {
        require_dir(&cfg.out)?;
    }
    let earth = cfg.earth();
    let rank_tol = cfg.tolerances.rank_tol;
    let rep = observability_along(&cfg.scenario, cfg.convention, cfg.obs_epochs, rank_tol, &earth)?;
    let axis = gravity_axis(cfg.convention, &rep.x0, &earth);
    let summary = ObservabilitySummary {
        scenario: &cfg.scenario_name,
        convention: cfg.convention.to_string(),
        epochs: cfg.obs_epochs,
        rows: rep.m.nrows(),
        rank: rep.rank,
        rank_tol,
        singular_values: &rep.singular_values,
        null_gravity_angles: (0..rep.null_space.ncols()).map(|k| rep.null_attitude_angle(k, &axis)).collect(),
    };
    println!("scenario      {} ({} epochs, {} convention)", cfg.scenario_name, cfg.obs_epochs, cfg.convention);
    println!("rank          {} of 15 (cutoff {rank_tol:.1e} σ_max)", rep.rank);
    let sv: Vec<String> = rep.singular_values.iter().map(|s| format!("{s:.3e}")).collect();
    println!("singular      {}", sv.join(" "));
    for (k, a) in summary.null_gravity_angles.iter().enumerate() {
        println!("null[{k}]       angle to gravity {}", opt(*a));
    }
    if cfg.out_given {
        write_json(&cfg.out.join("observability.json"), &summary)?;
    }
    Ok(())
}
