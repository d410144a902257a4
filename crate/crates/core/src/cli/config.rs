//! Flat `key = value` configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::earth::EarthModel;
use crate::errordyn::{Convention, NoiseParams};
use crate::filter::{FilterConfig, InitialSigma};
use crate::liegroup::Vec3;
use crate::sim::{scenario, Scenario};
use crate::verify::Tolerances;

use super::CliError;

/// Where a setting came from, for error messages.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Origin {
    File { path: PathBuf, line: usize },
    CommandLine,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::File { path, line } => write!(f, "{}:{line}", path.display()),
            Origin::CommandLine => f.write_str("command line"),
        }
    }
}

/// Merged raw settings; a later `set` of the same key replaces the earlier.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, Origin)>,
}

impl RawConfig {
    pub fn set(&mut self, key: &str, value: &str, origin: Origin) {
        self.entries.insert(key.trim().to_string(), (value.trim().to_string(), origin));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse_file_contents(&mut self, path: &Path, text: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let origin = Origin::File { path: path.to_path_buf(), line: i + 1 };
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Config { origin: origin.to_string(), msg: format!("expected key = value, got {line:?}") });
            };
            self.set(k, v, origin);
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        self.parse_file_contents(path, &text)
    }

    /// Parses a `key=value` command-line override.
    pub fn set_override(&mut self, kv: &str) -> Result<(), CliError> {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {kv:?}")))?;
        self.set(k, v, Origin::CommandLine);
        Ok(())
    }
}

/// Resolved settings for every subcommand.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scenario_name: String,
    /// The built-in scenario with `sim.*` overrides applied.
    pub scenario: Scenario,
    pub convention: Convention,
    pub seed: u64,
    pub out: PathBuf,
    /// Whether `out` was set explicitly; verify and observability then also
    /// write their reports there.
    pub out_given: bool,
    /// Directory `run` reads imu.csv, gnss.csv and truth.csv from.
    pub input: PathBuf,
    pub filter: FilterConfig,
    /// Monte Carlo repetitions for `run`; zero runs the files once.
    pub mc_runs: usize,
    pub obs_epochs: usize,
    pub tolerances: Tolerances,
}

pub const KEYS: &[&str] = &[
    "scenario",
    "convention",
    "seed",
    "out",
    "input",
    "earth.omega_ie",
    "earth.mu",
    "earth.semi_major",
    "earth.ecc2",
    "sim.duration",
    "sim.imu_rate",
    "sim.gnss_rate",
    "sim.speed",
    "sim.turn_rate",
    "sim.heading",
    "sim.gnss_sigma",
    "sim.gyro_psd",
    "sim.accel_psd",
    "sim.gyro_bias",
    "sim.accel_bias",
    "sim.lever",
    "filter.gyro_psd",
    "filter.accel_psd",
    "filter.gyro_bias_psd",
    "filter.accel_bias_psd",
    "filter.gnss_slop",
    "filter.lever",
    "init.att",
    "init.vel",
    "init.pos",
    "init.gyro_bias",
    "init.accel_bias",
    "mc.runs",
    "obs.epochs",
    "tol.group_affine",
    "tol.equivariance",
    "tol.gamma_series",
    "tol.gamma_recurrence",
    "tol.gamma_integrals",
    "tol.phi_left_rk4",
    "tol.phi_right_rk4",
    "tol.phi_right_order",
    "tol.log_linear",
    "tol.log_linear_order",
    "tol.jacobian_fd",
    "tol.observability_rank",
    "tol.observability_angle",
    "tol.rank_tol",
    "tol.dead_reckoning",
    "tol.samples",
];

fn bad(origin: &Origin, key: &str, msg: impl fmt::Display) -> CliError {
    CliError::Config { origin: origin.to_string(), msg: format!("{key}: {msg}") }
}

fn num<T: std::str::FromStr>(origin: &Origin, key: &str, v: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| bad(origin, key, format!("cannot parse {v:?}: {e}")))
}

fn vec3(origin: &Origin, key: &str, v: &str) -> Result<Vec3, CliError> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(bad(origin, key, format!("expected x,y,z, got {v:?}")));
    }
    Ok(Vec3::new(num(origin, key, parts[0])?, num(origin, key, parts[1])?, num(origin, key, parts[2])?))
}

impl RunConfig {
    /// Resolves raw settings: scenario defaults first, then every key.
    pub fn resolve(raw: &RawConfig) -> Result<Self, CliError> {
        for (k, (_, origin)) in &raw.entries {
            if !KEYS.contains(&k.as_str()) {
                return Err(bad(origin, k, "unknown key"));
            }
        }
        let scenario_name = raw.get("scenario").unwrap_or("S1").to_string();
        let sc = scenario(&scenario_name).map_err(|e| match raw.entries.get("scenario") {
            Some((_, o)) => bad(o, "scenario", e),
            None => CliError::Usage(e.to_string()),
        })?;
        let noise = NoiseParams { gyro_psd: sc.sensor.gyro_psd, accel_psd: sc.sensor.accel_psd, gyro_bias_psd: 0.0, accel_bias_psd: 0.0 };
        let mut filter = FilterConfig::new(Convention::RightInvariant, noise);
        filter.lever = sc.lever;
        let mut cfg = RunConfig {
            scenario_name,
            scenario: sc,
            convention: Convention::RightInvariant,
            seed: sc.sensor.seed,
            out: PathBuf::from("."),
            out_given: false,
            input: PathBuf::new(),
            filter,
            mc_runs: 0,
            obs_epochs: 10,
            tolerances: Tolerances::default(),
        };
        let mut lever_set = false;
        let mut input_set = false;
        for (k, (v, o)) in &raw.entries {
            let (key, v) = (k.as_str(), v.as_str());
            let f = || num::<f64>(o, key, v);
            let t = &mut cfg.tolerances;
            let tr = &mut cfg.scenario.trajectory;
            match key {
                "scenario" => {}
                "convention" => cfg.convention = v.parse().map_err(|e| bad(o, key, e))?,
                "seed" => cfg.seed = num(o, key, v)?,
                "out" => {
                    cfg.out = PathBuf::from(v);
                    cfg.out_given = true;
                }
                "input" => {
                    cfg.input = PathBuf::from(v);
                    input_set = true;
                }
                "earth.omega_ie" => cfg.filter.earth.omega_ie = f()?,
                "earth.mu" => cfg.filter.earth.mu = f()?,
                "earth.semi_major" => cfg.filter.earth.semi_major = f()?,
                "earth.ecc2" => cfg.filter.earth.ecc2 = f()?,
                "sim.duration" => tr.duration = f()?,
                "sim.imu_rate" => tr.imu_rate = f()?,
                "sim.gnss_rate" => tr.gnss_rate = f()?,
                "sim.speed" => tr.speed = f()?,
                "sim.turn_rate" => tr.turn_rate = f()?,
                "sim.heading" => tr.heading = f()?,
                "sim.gnss_sigma" => cfg.scenario.gnss_sigma = f()?,
                "sim.gyro_psd" => cfg.scenario.sensor.gyro_psd = f()?,
                "sim.accel_psd" => cfg.scenario.sensor.accel_psd = f()?,
                "sim.gyro_bias" => cfg.scenario.sensor.gyro_bias = vec3(o, key, v)?,
                "sim.accel_bias" => cfg.scenario.sensor.accel_bias = vec3(o, key, v)?,
                "sim.lever" => cfg.scenario.lever.l_b = vec3(o, key, v)?,
                "filter.gyro_psd" => cfg.filter.noise.gyro_psd = f()?,
                "filter.accel_psd" => cfg.filter.noise.accel_psd = f()?,
                "filter.gyro_bias_psd" => cfg.filter.noise.gyro_bias_psd = f()?,
                "filter.accel_bias_psd" => cfg.filter.noise.accel_bias_psd = f()?,
                "filter.gnss_slop" => cfg.filter.gnss_slop = f()?,
                "filter.lever" => {
                    cfg.filter.lever.l_b = vec3(o, key, v)?;
                    lever_set = true;
                }
                "init.att" => cfg.filter.initial.att = f()?,
                "init.vel" => cfg.filter.initial.vel = f()?,
                "init.pos" => cfg.filter.initial.pos = f()?,
                "init.gyro_bias" => cfg.filter.initial.gyro_bias = f()?,
                "init.accel_bias" => cfg.filter.initial.accel_bias = f()?,
                "mc.runs" => cfg.mc_runs = num(o, key, v)?,
                "obs.epochs" => cfg.obs_epochs = num(o, key, v)?,
                "tol.group_affine" => t.group_affine = f()?,
                "tol.equivariance" => t.equivariance = f()?,
                "tol.gamma_series" => t.gamma_series = f()?,
                "tol.gamma_recurrence" => t.gamma_recurrence = f()?,
                "tol.gamma_integrals" => t.gamma_integrals = f()?,
                "tol.phi_left_rk4" => t.phi_left_rk4 = f()?,
                "tol.phi_right_rk4" => t.phi_right_rk4 = f()?,
                "tol.phi_right_order" => t.phi_right_order = f()?,
                "tol.log_linear" => t.log_linear = f()?,
                "tol.log_linear_order" => t.log_linear_order = f()?,
                "tol.jacobian_fd" => t.jacobian_fd = f()?,
                "tol.observability_rank" => t.observability_rank = num(o, key, v)?,
                "tol.observability_angle" => t.observability_angle = f()?,
                "tol.rank_tol" => t.rank_tol = f()?,
                "tol.dead_reckoning" => t.dead_reckoning = f()?,
                "tol.samples" => t.samples = num(o, key, v)?,
                other => unreachable!("key {other} is listed but not handled"),
            }
        }
        if !lever_set {
            cfg.filter.lever = cfg.scenario.lever;
        }
        if !input_set {
            cfg.input = cfg.out.clone();
        }
        cfg.filter.convention = cfg.convention;
        cfg.scenario.sensor.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let wrap = |e: crate::Error| CliError::Usage(format!("invalid configuration: {e}"));
        self.filter.validate().map_err(wrap)?;
        self.scenario.trajectory.validate().map_err(wrap)?;
        self.scenario.sensor.validate().map_err(wrap)?;
        if !(self.scenario.gnss_sigma >= 0.0 && self.scenario.gnss_sigma.is_finite()) {
            return Err(CliError::Usage(format!("sim.gnss_sigma must be non-negative, got {}", self.scenario.gnss_sigma)));
        }
        if self.obs_epochs == 0 {
            return Err(CliError::Usage("obs.epochs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn earth(&self) -> EarthModel {
        self.filter.earth
    }

    pub fn initial(&self) -> InitialSigma {
        self.filter.initial
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(text: &str) -> Result<RawConfig, CliError> {
        let mut r = RawConfig::default();
        r.parse_file_contents(Path::new("test.cfg"), text)?;
        Ok(r)
    }

    #[test]
    fn defaults_follow_scenario() {
        let cfg = RunConfig::resolve(&RawConfig::default()).unwrap();
        assert_eq!(cfg.scenario_name, "S1");
        assert_eq!(cfg.filter.lever, cfg.scenario.lever);
        assert_eq!(cfg.input, cfg.out);
        assert_eq!(cfg.filter.noise.gyro_psd, 1e-9);
    }

    #[test]
    fn later_wins_and_comments() {
        let mut r = raw("# header\nseed = 5\nconvention = left  # trailing\n\nsim.gyro_bias = 1e-6, 0, -2e-6\n").unwrap();
        r.set_override("seed=9").unwrap();
        let cfg = RunConfig::resolve(&r).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.scenario.sensor.seed, 9);
        assert_eq!(cfg.convention, Convention::LeftInvariant);
        assert_eq!(cfg.filter.convention, Convention::LeftInvariant);
        assert_eq!(cfg.scenario.sensor.gyro_bias, Vec3::new(1e-6, 0.0, -2e-6));
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let err = RunConfig::resolve(&raw("seed = 1\nbogus = 3\n").unwrap()).unwrap_err().to_string();
        assert!(err.contains("test.cfg:2") && err.contains("bogus"), "{err}");
        let err = raw("seed 1\n").unwrap_err().to_string();
        assert!(err.contains("test.cfg:1"), "{err}");
        let err = RunConfig::resolve(&raw("sim.lever = 1,2\n").unwrap()).unwrap_err().to_string();
        assert!(err.contains("x,y,z"), "{err}");
        assert!(RunConfig::resolve(&raw("convention = both\n").unwrap()).is_err());
        assert!(RunConfig::resolve(&raw("scenario = nowhere\n").unwrap()).is_err());
        assert!(RunConfig::resolve(&raw("sim.imu_rate = 150.5\n").unwrap()).is_err());
    }

    #[test]
    fn every_listed_key_is_accepted() {
        let values = |k: &str| match k {
            "scenario" => "static",
            "convention" => "left",
            "out" | "input" => "/tmp",
            k if k.ends_with("bias") && k.starts_with("sim.") || k.ends_with("lever") => "0,0,0",
            "seed" | "mc.runs" | "obs.epochs" | "tol.observability_rank" | "tol.samples" => "3",
            "sim.imu_rate" => "100",
            "sim.gnss_rate" | "sim.duration" => "1",
            "earth.omega_ie" => "7e-5",
            "earth.mu" => "3.9e14",
            "earth.semi_major" => "6378137",
            "earth.ecc2" => "0.0066",
            _ => "0.5",
        };
        let mut r = RawConfig::default();
        for k in KEYS {
            r.set(k, values(k), Origin::CommandLine);
        }
        RunConfig::resolve(&r).unwrap();
    }
}
