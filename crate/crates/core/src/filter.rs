//! The 15-state invariant filter in the transformed ECEF frame, GNSS position
//! updates, full runs, Monte Carlo consistency runs and the discrete
//! observability matrix.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::earth::{c_n_e, EarthModel};
use crate::error::{Error, Result};
use crate::errordyn::{
    apply_feedback, error_state, estimate_with_error, g_matrix, h_matrix, predicted_antenna, Biases, Convention, ErrorState15, LeverArm, Mat15, NoiseParams,
    Vec15,
};
use crate::kinematics::{mechanize_ecef, ImuSample};
use crate::liegroup::{skew, FrameTag, GroupElement, Mat3, Vec3};
use crate::par::{map_indexed, ExecMode};
use crate::sim::{generate_truth, synthesize_gnss, synthesize_imu, Profile, Scenario, SensorErrorSpec, TruthPoint};
use crate::transition::{phi, qd_matrix, TransitionBlocks};

pub use crate::sim::GnssFix;

/// Condition number above which the innovation covariance counts as singular.
const MAX_INNOVATION_COND: f64 = 1e12;

/// Standard deviations of the initial error state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InitialSigma {
    /// rad
    pub att: f64,
    /// m/s
    pub vel: f64,
    /// m
    pub pos: f64,
    /// rad/s
    pub gyro_bias: f64,
    /// m/s²
    pub accel_bias: f64,
}

impl Default for InitialSigma {
    fn default() -> Self {
        InitialSigma { att: 1e-4, vel: 1e-2, pos: 1.0, gyro_bias: 1e-5, accel_bias: 1e-2 }
    }
}

impl InitialSigma {
    /// Diagonal covariance of the physical attitude, velocity, position and
    /// bias errors.
    pub fn physical(&self) -> Mat15 {
        let s = [self.att, self.vel, self.pos, self.gyro_bias, self.accel_bias];
        Mat15::from_diagonal(&Vec15::from_fn(|i, _| s[i / 3] * s[i / 3]))
    }

    /// The same prior in the convention's error coordinates at `x`. The
    /// sigmas are isotropic, so the left convention's body-frame resolution
    /// leaves them unchanged; the right convention picks up the `r̃×φ` and
    /// `ṽ×φ` couplings.
    pub fn covariance(&self, conv: Convention, x: &GroupElement) -> Mat15 {
        let (_, t_inv) = local_basis(conv, x);
        symmetrize(&(t_inv * self.physical() * t_inv.transpose()))
    }

    pub fn validate(&self) -> Result<()> {
        for v in [self.att, self.vel, self.pos, self.gyro_bias, self.accel_bias] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("initial sigma must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Everything the filter needs besides the data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterConfig {
    pub convention: Convention,
    pub noise: NoiseParams,
    pub lever: LeverArm,
    pub initial: InitialSigma,
    /// Maximum |t_fix − t_state| for applying a fix, s.
    pub gnss_slop: f64,
    pub earth: EarthModel,
}

impl FilterConfig {
    pub fn new(convention: Convention, noise: NoiseParams) -> Self {
        FilterConfig { convention, noise, lever: LeverArm::default(), initial: InitialSigma::default(), gnss_slop: 1e-6, earth: EarthModel::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        self.initial.validate()?;
        self.earth.validate()?;
        if !(self.gnss_slop >= 0.0 && self.gnss_slop.is_finite()) {
            return Err(Error::InvalidParameter(format!("gnss_slop must be non-negative, got {}", self.gnss_slop)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterState {
    pub x: GroupElement,
    pub bg: Vec3,
    pub ba: Vec3,
    pub p: Mat15,
    pub t: f64,
    pub convention: Convention,
}

fn symmetrize(p: &Mat15) -> Mat15 {
    (p + p.transpose()) * 0.5
}

impl FilterState {
    pub fn new(x: GroupElement, biases: Biases, p: Mat15, t: f64, convention: Convention) -> Result<Self> {
        if x.frame != FrameTag::EcefIb {
            return Err(Error::FrameMismatch { expected: FrameTag::EcefIb, actual: x.frame });
        }
        let s = FilterState { x, bg: biases.gyro, ba: biases.accel, p, t, convention };
        s.check_covariance()?;
        Ok(s)
    }

    pub fn biases(&self) -> Biases {
        Biases { gyro: self.bg, accel: self.ba }
    }

    /// Symmetric to 1e-12 relative and eigenvalues ≥ −1e-10·trace.
    pub fn check_covariance(&self) -> Result<()> {
        if self.p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariance"));
        }
        let scale = self.p.norm().max(1e-300);
        let asym = (self.p - self.p.transpose()).norm() / scale;
        if asym > 1e-12 {
            return Err(Error::InvalidParameter(format!("covariance asymmetry {asym:.3e}")));
        }
        let min = SymmetricEigen::new(self.p).eigenvalues.min();
        if min < -1e-10 * self.p.trace().abs() {
            return Err(Error::InvalidParameter(format!("covariance eigenvalue {min:.3e} is negative")));
        }
        Ok(())
    }
}

/// Bias-corrected IMU sample.
fn corrected(state: &FilterState, imu: &ImuSample) -> ImuSample {
    ImuSample { t: imu.t, gyro: imu.gyro - state.bg, accel: imu.accel - state.ba }
}

/// Transition matrix and discrete noise for one prediction step.
pub fn step_matrices(state: &FilterState, imu: &ImuSample, noise: &NoiseParams, earth: &EarthModel) -> Result<(TransitionBlocks, Mat15)> {
    let dt = imu.t - state.t;
    let u = corrected(state, imu);
    let ph = phi(state.convention, &state.x, &u, earth, dt)?;
    let g = g_matrix(state.convention, &state.x)?;
    let q = qd_matrix(&ph, &g, noise, dt);
    Ok((ph, q))
}

/// Propagates mean and covariance to `imu.t`; the sample holds the rates over
/// `(state.t, imu.t]`.
pub fn predict(state: &FilterState, imu: &ImuSample, noise: &NoiseParams, earth: &EarthModel) -> Result<FilterState> {
    let dt = imu.t - state.t;
    if dt == 0.0 {
        return Ok(*state);
    }
    if !(dt > 0.0) {
        return Err(Error::NonMonotonicTime { epoch: 0, t: imu.t, prev: state.t });
    }
    let (ph, q) = step_matrices(state, imu, noise, earth)?;
    let u = corrected(state, imu);
    let x = mechanize_ecef(&state.x, u.gyro, u.accel, earth, dt)?;
    let (t0, t0_inv) = local_basis(state.convention, &state.x);
    let (t1, t1_inv) = local_basis(state.convention, &x);
    let phi_loc = t1 * ph.phi * t0_inv;
    let p_loc = symmetrize(&(t0 * state.p * t0.transpose()));
    let p_loc = phi_loc * p_loc * phi_loc.transpose() + t1 * q * t1.transpose();
    Ok(FilterState { x, p: symmetrize(&(t1_inv * p_loc * t1_inv.transpose())), t: imu.t, ..*state })
}

/// Change of error coordinates to `(φ, ρ_v + ṽ×φ, ρ_r + r̃×φ, δb)` for the
/// right convention, which is close to the plain velocity and position
/// error. The right error at earth-scale |r̃| couples position and attitude
/// through entries of order |r̃|, so covariance arithmetic done directly in
/// it loses about twelve digits once a fix pins the position; in this basis
/// the same algebra is well conditioned. Identity for the left convention.
pub fn local_basis(conv: Convention, x: &GroupElement) -> (Mat15, Mat15) {
    let mut t = Mat15::identity();
    let mut t_inv = Mat15::identity();
    if conv == Convention::RightInvariant {
        for (row, v) in [(3, x.vel), (6, x.pos)] {
            t.fixed_view_mut::<3, 3>(row, 0).copy_from(&skew(&v));
            t_inv.fixed_view_mut::<3, 3>(row, 0).copy_from(&-skew(&v));
        }
    }
    (t, t_inv)
}

/// Outcome of one GNSS update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateInfo {
    /// `y − (r̃ + C̃l)`, ECEF m
    pub innovation: Vec3,
    pub nis: f64,
}

/// Joseph-form GNSS position update.
///
/// Both conventions use the world-frame innovation; the left Jacobian already
/// maps the body-frame error into it, so NIS is convention independent.
pub fn update_gnss(state: &FilterState, fix: &GnssFix, lever: &LeverArm, slop: f64) -> Result<(FilterState, UpdateInfo)> {
    if (fix.t - state.t).abs() > slop {
        return Err(Error::Misaligned { fix_t: fix.t, state_t: state.t, slop });
    }
    let conv = state.convention;
    let (t, t_inv) = local_basis(conv, &state.x);
    let h = h_matrix(conv, &state.x, lever)? * t_inv;
    let p = symmetrize(&(t * state.p * t.transpose()));
    let z = fix.pos - predicted_antenna(&state.x, lever);
    let s = h * p * h.transpose() + fix.cov;
    let eig = SymmetricEigen::new(s).eigenvalues;
    let cond = eig.max() / eig.min();
    if !(eig.min() > 0.0 && cond <= MAX_INNOVATION_COND) {
        return Err(Error::SingularInnovationCov(cond));
    }
    let chol = Cholesky::new(s).ok_or(Error::SingularInnovationCov(cond))?;
    let s_inv = chol.inverse();
    let k = p * h.transpose() * s_inv;
    let dx = ErrorState15::from_vector(&(t_inv * (k * z)), conv);
    let (x, b) = apply_feedback(conv, &state.x, &state.biases(), &dx)?;
    let ikh = Mat15::identity() - k * h;
    let p = ikh * p * ikh.transpose() + k * fix.cov * k.transpose();
    let p = symmetrize(&(t_inv * p * t_inv.transpose()));
    let nis = (z.transpose() * s_inv * z)[0];
    Ok((FilterState { x, bg: b.gyro, ba: b.accel, p, ..*state }, UpdateInfo { innovation: z, nis }))
}

/// Ground truth for error and NEES reporting.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthTrack {
    pub states: Vec<(f64, GroupElement)>,
    /// Known constant biases; NEES then uses all 15 states, otherwise the 9
    /// navigation states.
    pub biases: Option<Biases>,
}

impl TruthTrack {
    pub fn from_points(points: &[TruthPoint], biases: Option<Biases>) -> Self {
        TruthTrack { states: points.iter().map(|p| (p.t, p.x)).collect(), biases }
    }
}

/// Filter output at one IMU epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub t: f64,
    pub x: GroupElement,
    pub biases: Biases,
    pub p_diag: Vec15,
    pub update: Option<UpdateInfo>,
    pub error: Option<ErrorState15>,
    pub nees: Option<f64>,
    pub nees_dof: usize,
}

/// `eᵀP⁻¹e` over the first `dof` states.
fn nees(p: &Mat15, e: &Vec15, dof: usize) -> Option<f64> {
    let sub = DMatrix::from_fn(dof, dof, |i, j| p[(i, j)]);
    let v = nalgebra::DVector::from_fn(dof, |i, _| e[i]);
    let chol = Cholesky::new(sub)?;
    Some(v.dot(&chol.solve(&v)))
}

fn record(state: &FilterState, update: Option<UpdateInfo>, truth: Option<(&GroupElement, &Option<Biases>)>) -> Result<EpochRecord> {
    let (mut error, mut nees_v, mut dof) = (None, None, 0);
    if let Some((x, b)) = truth {
        let tb = b.unwrap_or(state.biases());
        let e = error_state(state.convention, &state.x, &state.biases(), x, &tb)?;
        dof = if b.is_some() { 15 } else { 9 };
        nees_v = nees(&state.p, &e.to_vector(), dof);
        error = Some(e);
    }
    Ok(EpochRecord { t: state.t, x: state.x, biases: state.biases(), p_diag: state.p.diagonal(), update, error, nees: nees_v, nees_dof: dof })
}

/// Runs the filter through an IMU stream, applying each fix at the IMU epoch
/// within `gnss_slop` of it. One record per IMU epoch, starting with `init`.
pub fn run(init: &FilterState, imu: &[ImuSample], gnss: &[GnssFix], cfg: &FilterConfig, truth: Option<&TruthTrack>) -> Result<Vec<EpochRecord>> {
    cfg.validate()?;
    let mut state = *init;
    let mut out = Vec::with_capacity(imu.len() + 1);
    let mut next_fix = 0;
    let mut next_truth = 0;
    let slop = cfg.gnss_slop;

    let mut finish_epoch = |state: &mut FilterState, epoch: usize, next_fix: &mut usize| -> Result<EpochRecord> {
        let mut info = None;
        while *next_fix < gnss.len() && gnss[*next_fix].t <= state.t + slop {
            let fix = &gnss[*next_fix];
            if fix.t < state.t - slop {
                return Err(Error::Misaligned { fix_t: fix.t, state_t: state.t, slop }.at_epoch(epoch));
            }
            let (s, u) = update_gnss(state, fix, &cfg.lever, slop).map_err(|e| e.at_epoch(epoch))?;
            *state = s;
            info = Some(u);
            *next_fix += 1;
        }
        let matched = truth.and_then(|tr| {
            while next_truth < tr.states.len() && tr.states[next_truth].0 < state.t - slop {
                next_truth += 1;
            }
            tr.states.get(next_truth).filter(|(t, _)| (t - state.t).abs() <= slop).map(|(_, x)| (x, &tr.biases))
        });
        record(state, info, matched).map_err(|e| e.at_epoch(epoch))
    };

    out.push(finish_epoch(&mut state, 0, &mut next_fix)?);
    for (k, sample) in imu.iter().enumerate() {
        if !(sample.t > state.t) {
            return Err(Error::NonMonotonicTime { epoch: k, t: sample.t, prev: state.t });
        }
        state = predict(&state, sample, &cfg.noise, &cfg.earth).map_err(|e| e.at_epoch(k))?;
        out.push(finish_epoch(&mut state, k + 1, &mut next_fix)?);
    }
    if next_fix < gnss.len() {
        log::warn!("{} GNSS fixes after the last IMU epoch were not applied", gnss.len() - next_fix);
    }
    Ok(out)
}

/// Aggregate error metrics of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub epochs: usize,
    pub updates: usize,
    pub rms_pos: Option<f64>,
    pub rms_vel: Option<f64>,
    pub rms_att: Option<f64>,
    pub rms_horizontal: Option<f64>,
    pub mean_nees: Option<f64>,
    pub mean_nis: Option<f64>,
}

fn rms(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt())
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Summary over all epochs. Position, velocity and attitude errors are the
/// plain differences `x̃ − x`; horizontal error is resolved in the local
/// level frame at each truth position.
pub fn summarize(records: &[EpochRecord], truth: Option<&TruthTrack>, earth: &EarthModel, slop: f64) -> RunSummary {
    let mut pos = Vec::new();
    let mut vel = Vec::new();
    let mut att = Vec::new();
    let mut hor = Vec::new();
    if let Some(tr) = truth {
        let mut j = 0;
        for r in records {
            while j < tr.states.len() && tr.states[j].0 < r.t - slop {
                j += 1;
            }
            let Some((t, x)) = tr.states.get(j) else { break };
            if (t - r.t).abs() > slop {
                continue;
            }
            let dr = r.x.pos - x.pos;
            pos.push(dr.norm());
            vel.push((r.x.vel - x.vel).norm());
            att.push(crate::liegroup::so3_log(&r.x.rot.transpose().compose(&x.rot)).norm());
            let geo = earth.ecef_to_geodetic(&x.pos);
            let n = c_n_e(geo.lat, geo.lon).mat().transpose() * dr;
            hor.push(n.xy().norm());
        }
    }
    let nees: Vec<f64> = records.iter().filter(|r| r.update.is_some()).filter_map(|r| r.nees).collect();
    let nis: Vec<f64> = records.iter().filter_map(|r| r.update.map(|u| u.nis)).collect();
    RunSummary {
        epochs: records.len(),
        updates: nis.len(),
        rms_pos: rms(&pos),
        rms_vel: rms(&vel),
        rms_att: rms(&att),
        rms_horizontal: rms(&hor),
        mean_nees: mean(&nees),
        mean_nis: mean(&nis),
    }
}

fn normal_vec15(rng: &mut ChaCha8Rng) -> Vec15 {
    Vec15::from_fn(|_, _| StandardNormal.sample(rng))
}

/// One Monte Carlo run's inputs: an initial estimate whose error and whose
/// true biases are drawn from the filter prior, plus fresh sensor noise.
pub struct MonteCarloRun {
    pub init: FilterState,
    pub imu: Vec<ImuSample>,
    pub gnss: Vec<GnssFix>,
    pub truth: TruthTrack,
}

/// Draws run `index` of a Monte Carlo set; seeds are `seed + index`.
pub fn monte_carlo_run(scenario: &Scenario, cfg: &FilterConfig, truth: &[TruthPoint], seed: u64, index: usize) -> Result<MonteCarloRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64));
    let (_, t_inv) = local_basis(cfg.convention, &truth[0].x);
    let draw = normal_vec15(&mut rng).component_mul(&cfg.initial.physical().diagonal().map(f64::sqrt));
    let d = ErrorState15::from_vector(&(t_inv * draw), cfg.convention);
    let biases = Biases { gyro: d.db_g, accel: d.db_a };
    let x0 = estimate_with_error(cfg.convention, &truth[0].x, &d.nav());
    let p0 = cfg.initial.covariance(cfg.convention, &x0);
    let init = FilterState::new(x0, Biases::default(), p0, truth[0].t, cfg.convention)?;

    let profile = Profile::new(scenario.trajectory, cfg.earth)?;
    let sensor = SensorErrorSpec {
        gyro_bias: biases.gyro,
        accel_bias: biases.accel,
        gyro_psd: cfg.noise.gyro_psd,
        accel_psd: cfg.noise.accel_psd,
        seed: rand::Rng::random(&mut rng),
    };
    let imu = synthesize_imu(&profile, &sensor)?;
    let cov = Mat3::identity() * scenario.gnss_sigma.powi(2);
    let gnss = synthesize_gnss(truth, &cfg.lever, scenario.trajectory.gnss_rate, &cov, rand::Rng::random(&mut rng))?;
    Ok(MonteCarloRun { init, imu, gnss, truth: TruthTrack::from_points(truth, Some(biases)) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub runs: usize,
    /// NEES after each update, averaged over updates and runs
    pub mean_nees: f64,
    pub mean_nis: f64,
    /// RMS over runs and epochs of the horizontal position error
    pub rms_horizontal: f64,
    pub per_run: Vec<RunSummary>,
}

/// Independent filter runs on one scenario, fanned out per `mode`.
pub fn monte_carlo(scenario: &Scenario, cfg: &FilterConfig, runs: usize, seed: u64, mode: ExecMode) -> Result<MonteCarloSummary> {
    if runs == 0 {
        return Err(Error::InvalidParameter("Monte Carlo needs at least one run".into()));
    }
    let truth = generate_truth(&scenario.trajectory, &cfg.earth)?;
    let results = map_indexed(mode, runs, |i| -> Result<RunSummary> {
        let r = monte_carlo_run(scenario, cfg, &truth, seed, i)?;
        let records = run(&r.init, &r.imu, &r.gnss, cfg, Some(&r.truth))?;
        Ok(summarize(&records, Some(&r.truth), &cfg.earth, cfg.gnss_slop))
    });
    let per_run = results.into_iter().collect::<Result<Vec<_>>>()?;
    let avg = |f: &dyn Fn(&RunSummary) -> Option<f64>| per_run.iter().filter_map(f).sum::<f64>() / per_run.len() as f64;
    let hor2 = avg(&|r| r.rms_horizontal.map(|h| h * h));
    Ok(MonteCarloSummary { runs, mean_nees: avg(&|r| r.mean_nees), mean_nis: avg(&|r| r.mean_nis), rms_horizontal: hor2.sqrt(), per_run })
}

/// Stacked observability matrix and its numeric rank.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservabilityReport {
    pub m: DMatrix<f64>,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// Columns spanning the numeric null space.
    pub null_space: DMatrix<f64>,
    pub convention: Convention,
    /// Linearisation point of the first block.
    pub x0: GroupElement,
}

impl ObservabilityReport {
    /// Angle between the attitude part of null vector `k` and `axis`, rad,
    /// ignoring sign.
    pub fn null_attitude_angle(&self, k: usize, axis: &Vec3) -> Option<f64> {
        if k >= self.null_space.ncols() {
            return None;
        }
        let v = self.null_space.column(k);
        let phi = Vec3::new(v[0], v[1], v[2]);
        if phi.norm() == 0.0 || axis.norm() == 0.0 {
            return None;
        }
        let c = (phi.dot(axis) / (phi.norm() * axis.norm())).abs().min(1.0);
        Some(c.acos())
    }
}

/// Stacks `H_l Φ(t_l, t_0)` at epochs `0, stride, …, (m−1)·stride` along a
/// trajectory: `traj[k]` is the estimate at `t_k` and `imu[k]` the
/// (bias-corrected) sample over `(t_k, t_{k+1}]`. The rank counts singular
/// values above `rank_tol · σ_max`.
#[allow(clippy::too_many_arguments)]
pub fn observability_matrix(
    conv: Convention,
    traj: &[GroupElement],
    times: &[f64],
    imu: &[ImuSample],
    stride: usize,
    m: usize,
    lever: &LeverArm,
    earth: &EarthModel,
    rank_tol: f64,
) -> Result<ObservabilityReport> {
    if m == 0 || stride == 0 {
        return Err(Error::InvalidParameter("observability needs m ≥ 1 and stride ≥ 1".into()));
    }
    let last = (m - 1) * stride;
    if traj.len() <= last || times.len() != traj.len() || imu.len() < last {
        return Err(Error::InvalidParameter(format!("trajectory too short for {m} epochs at stride {stride}")));
    }
    let mut big = DMatrix::zeros(3 * m, 15);
    let mut cum = Mat15::identity();
    for k in 0..=last {
        if k % stride == 0 {
            let h = h_matrix(conv, &traj[k], lever)?;
            let row = h * cum;
            big.view_mut((3 * (k / stride), 0), (3, 15)).copy_from(&row);
        }
        if k < last {
            let dt = times[k + 1] - times[k];
            let step = phi(conv, &traj[k], &imu[k], earth, dt)?;
            cum = step.phi * cum;
        }
    }
    // rank and null space are computed in the conditioned basis at t_0; the
    // raw right-convention columns differ in scale by |r̃|
    let (_, t0_inv) = local_basis(conv, &traj[0]);
    let t0_inv = DMatrix::from_fn(15, 15, |i, j| t0_inv[(i, j)]);
    let svd = (&big * &t0_inv).svd(false, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let smax = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > rank_tol * smax).count();
    // right singular vectors for the dropped values, plus the 15 − rows
    // directions a short stack cannot reach
    let v_t = svd.v_t.expect("v_t requested");
    let full = if v_t.nrows() < 15 { complete_basis(&v_t) } else { v_t };
    let ranked: Vec<usize> = order.iter().copied().chain(sv.len()..15).collect();
    let null_idx = &ranked[rank..];
    let mut null_space = &t0_inv * DMatrix::from_fn(15, null_idx.len(), |i, j| full[(null_idx[j], i)]);
    for mut c in null_space.column_iter_mut() {
        c.normalize_mut();
    }
    Ok(ObservabilityReport { m: big, rank, singular_values: sv, null_space, convention: conv, x0: traj[0] })
}

/// Extends orthonormal rows to an orthonormal basis of ℝ¹⁵.
fn complete_basis(rows: &DMatrix<f64>) -> DMatrix<f64> {
    let mut basis: Vec<nalgebra::DVector<f64>> = rows.row_iter().map(|r| r.transpose()).collect();
    for e in 0..15 {
        let mut v = nalgebra::DVector::from_fn(15, |i, _| if i == e { 1.0 } else { 0.0 });
        for b in &basis {
            v -= b * b.dot(&v);
        }
        if v.norm() > 1e-8 {
            basis.push(v.normalize());
        }
        if basis.len() == 15 {
            break;
        }
    }
    DMatrix::from_fn(15, 15, |i, j| basis[i][j])
}

/// The null direction expected for yaw about gravity in the convention's
/// error frame: world-frame `G` (right) or body-frame `C̃ᵀG` (left).
pub fn gravity_axis(conv: Convention, x: &GroupElement, earth: &EarthModel) -> Vec3 {
    let g = earth.gravitation(&x.pos);
    match conv {
        Convention::RightInvariant => g,
        Convention::LeftInvariant => x.rot.mat().transpose() * g,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::earth::Geodetic;
    use crate::errordyn::retract;
    use crate::liegroup::so3_exp;
    use crate::liegroup::Tangent9;
    use crate::sim::{dead_reckon, scenario, ProfileKind};
    use rand::Rng;

    const CONVS: [Convention; 2] = [Convention::LeftInvariant, Convention::RightInvariant];

    fn noise() -> NoiseParams {
        NoiseParams { gyro_psd: 1e-9, accel_psd: 1e-6, gyro_bias_psd: 0.0, accel_bias_psd: 0.0 }
    }

    fn short_s1(duration: f64) -> Scenario {
        let mut s = scenario("S1").unwrap();
        s.trajectory.duration = duration;
        s
    }

    fn start(conv: Convention, truth: &[TruthPoint]) -> FilterState {
        FilterState::new(truth[0].x, Biases::default(), InitialSigma::default().covariance(conv, &truth[0].x), truth[0].t, conv).unwrap()
    }

    #[test]
    fn predict_basics() {
        let earth = EarthModel::default();
        let sc = short_s1(2.0);
        let truth = generate_truth(&sc.trajectory, &earth).unwrap();
        let imu = synthesize_imu(&Profile::new(sc.trajectory, earth).unwrap(), &SensorErrorSpec::perfect()).unwrap();
        for conv in CONVS {
            let s0 = start(conv, &truth);
            assert_eq!(predict(&s0, &ImuSample { t: s0.t, ..imu[0] }, &noise(), &earth).unwrap(), s0);
            let s1 = predict(&s0, &imu[0], &noise(), &earth).unwrap();
            assert!(s1.p.trace() > s0.p.trace());
            s1.check_covariance().unwrap();
            assert!(predict(&s1, &imu[0], &noise(), &earth).is_ok());
            assert!(matches!(predict(&s1, &ImuSample { t: 0.0, ..imu[0] }, &noise(), &earth), Err(Error::NonMonotonicTime { .. })));
        }
    }

    #[test]
    fn stationary_drift() {
        let earth = EarthModel::default();
        let mut sc = scenario("static").unwrap();
        sc.trajectory.duration = 10.0;
        let truth = generate_truth(&sc.trajectory, &earth).unwrap();
        let imu = synthesize_imu(&Profile::new(sc.trajectory, earth).unwrap(), &SensorErrorSpec::perfect()).unwrap();
        let mut s = start(Convention::RightInvariant, &truth);
        for u in &imu {
            s = predict(&s, u, &noise(), &earth).unwrap();
        }
        assert!((s.x.pos - truth.last().unwrap().x.pos).norm() <= 1e-6);
    }

    #[test]
    fn left_covariance_ignores_trajectory() {
        let earth = EarthModel::default();
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let u = ImuSample { t: 0.01, gyro: Vec3::new(0.1, -0.2, 0.05), accel: Vec3::new(0.3, 0.1, -9.7) };
        let p = InitialSigma::default().physical();
        let a = GroupElement {
            rot: so3_exp(&Vec3::new(r.random(), r.random(), r.random())),
            vel: Vec3::new(1.0, 2.0, 3.0),
            pos: Vec3::new(6.4e6, 0.0, 1.0),
            frame: FrameTag::EcefIb,
        };
        let b = GroupElement {
            rot: so3_exp(&Vec3::new(-1.0, 0.5, 0.2)),
            vel: Vec3::new(-300.0, 2.0, 3.0),
            pos: Vec3::new(0.0, 6.4e6, 1e5),
            frame: FrameTag::EcefIb,
        };
        let sa = FilterState::new(a, Biases::default(), p, 0.0, Convention::LeftInvariant).unwrap();
        let sb = FilterState::new(b, Biases::default(), p, 0.0, Convention::LeftInvariant).unwrap();
        let (pa, qa) = step_matrices(&sa, &u, &noise(), &earth).unwrap();
        let (pb, qb) = step_matrices(&sb, &u, &noise(), &earth).unwrap();
        assert_eq!(pa.phi, pb.phi);
        assert_eq!(qa, qb);
    }

    fn fix_at(x: &GroupElement, lever: &LeverArm, t: f64, sigma: f64) -> GnssFix {
        GnssFix { t, pos: predicted_antenna(x, lever), cov: Mat3::identity() * sigma * sigma }
    }

    #[test]
    fn update_single_step_algebra() {
        let earth = EarthModel::default();
        let x = GroupElement {
            rot: so3_exp(&Vec3::new(0.3, -0.2, 1.0)),
            vel: Vec3::new(100.0, 300.0, 5.0),
            pos: earth.geodetic_to_ecef(&Geodetic { lat: 0.5, lon: 0.1, height: 0.0 }),
            frame: FrameTag::EcefIb,
        };
        for conv in CONVS {
            let p = InitialSigma::default().covariance(conv, &x);
            // perfect fix, vanishing prior: unchanged
            let tight = FilterState::new(x, Biases::default(), p * 1e-20, 0.0, conv).unwrap();
            let (post, info) = update_gnss(&tight, &fix_at(&x, &LeverArm::default(), 0.0, 1.0), &LeverArm::default(), 1e-6).unwrap();
            assert!(post.x.distance(&x) <= 1e-9 && info.innovation.norm() == 0.0);
            // exact fix with tiny R pulls the position onto it
            let off = retract(conv, &x, &Tangent9::new(Vec3::zeros(), Vec3::zeros(), Vec3::new(3.0, -2.0, 1.0)));
            let s = FilterState::new(off, Biases::default(), p, 0.0, conv).unwrap();
            let (post, info) = update_gnss(&s, &fix_at(&x, &LeverArm::default(), 0.0, 1e-5), &LeverArm::default(), 1e-6).unwrap();
            assert!((post.x.pos - x.pos).norm() <= 1e-6, "{conv:?} {}", (post.x.pos - x.pos).norm());
            assert!(info.nis > 0.0);
            post.check_covariance().unwrap();
            // time alignment and conditioning
            assert!(matches!(update_gnss(&s, &fix_at(&x, &LeverArm::default(), 0.1, 1.0), &LeverArm::default(), 1e-6), Err(Error::Misaligned { .. })));
            let singular = FilterState { p: Mat15::zeros(), ..s };
            assert!(matches!(
                update_gnss(&singular, &fix_at(&x, &LeverArm::default(), 0.0, 0.0), &LeverArm::default(), 1e-6),
                Err(Error::SingularInnovationCov(_))
            ));
        }
    }

    #[test]
    fn joseph_keeps_covariance_valid() {
        let mut r = ChaCha8Rng::seed_from_u64(9);
        let x = GroupElement { rot: so3_exp(&Vec3::new(0.1, 0.2, 0.3)), vel: Vec3::zeros(), pos: Vec3::new(6.4e6, 1.0, 2.0), frame: FrameTag::EcefIb };
        for conv in CONVS {
            for _ in 0..20 {
                let a = nalgebra::SMatrix::<f64, 15, 15>::from_fn(|_, _| r.random_range(-1.0..1.0));
                let d = InitialSigma::default().physical().map(f64::sqrt);
                let p = d * (a * a.transpose() + Mat15::identity() * 1e-6) * d;
                let s = FilterState::new(x, Biases::default(), symmetrize(&p), 0.0, conv).unwrap();
                let lever = LeverArm { l_b: Vec3::new(0.3, 0.0, -1.0) };
                let mut fix = fix_at(&x, &lever, 0.0, 0.5);
                fix.pos += Vec3::new(0.2, -0.1, 0.4);
                let (post, _) = update_gnss(&s, &fix, &lever, 1e-6).unwrap();
                post.check_covariance().unwrap();
                assert!(post.p.trace() < s.p.trace());
            }
        }
    }

    #[test]
    fn run_dead_reckons_and_rejects_duplicates() {
        let earth = EarthModel::default();
        let sc = short_s1(5.0);
        let truth = generate_truth(&sc.trajectory, &earth).unwrap();
        let imu = synthesize_imu(&Profile::new(sc.trajectory, earth).unwrap(), &SensorErrorSpec::perfect()).unwrap();
        let cfg = FilterConfig::new(Convention::RightInvariant, noise());
        let recs = run(&start(cfg.convention, &truth), &imu, &[], &cfg, None).unwrap();
        assert_eq!(recs.len(), imu.len() + 1);
        assert!(recs.iter().all(|r| r.update.is_none() && r.error.is_none()));
        let dr = dead_reckon(&truth[0].x, 0.0, &imu, &earth).unwrap();
        assert!((recs.last().unwrap().x.pos - dr.last().unwrap().pos).norm() <= 1e-6);

        let mut dup = imu.clone();
        dup[7].t = dup[6].t;
        match run(&start(cfg.convention, &truth), &dup, &[], &cfg, None) {
            Err(Error::NonMonotonicTime { epoch, .. }) => assert_eq!(epoch, 7),
            other => panic!("{other:?}"),
        }
        let stray = [GnssFix { t: 0.505, pos: truth[50].x.pos, cov: Mat3::identity() }];
        assert!(matches!(run(&start(cfg.convention, &truth), &imu, &stray, &cfg, None), Err(Error::AtEpoch { .. })));
    }

    #[test]
    fn conventions_agree_on_noise_free_data() {
        let earth = EarthModel::default();
        let sc = short_s1(60.0);
        let truth = generate_truth(&sc.trajectory, &earth).unwrap();
        let imu = synthesize_imu(&Profile::new(sc.trajectory, earth).unwrap(), &SensorErrorSpec::perfect()).unwrap();
        let gnss = synthesize_gnss(&truth, &sc.lever, 1.0, &(Mat3::identity() * 1e-6), 1).unwrap();
        let gnss: Vec<GnssFix> =
            gnss.into_iter().map(|f| GnssFix { pos: predicted_antenna(&truth[(f.t * 100.0).round() as usize].x, &sc.lever), ..f }).collect();
        let mut ends = Vec::new();
        for conv in CONVS {
            let mut cfg = FilterConfig::new(conv, noise());
            cfg.lever = sc.lever;
            let recs = run(&start(conv, &truth), &imu, &gnss, &cfg, None).unwrap();
            ends.push(recs.last().unwrap().x);
        }
        assert!(ends[0].distance(&ends[1]) <= 1e-6, "{}", ends[0].distance(&ends[1]));
        assert!((ends[0].pos - truth.last().unwrap().x.pos).norm() <= 1e-5);
    }

    #[test]
    fn monte_carlo_small_is_sane_and_mode_independent() {
        let sc = short_s1(20.0);
        let mut cfg = FilterConfig::new(Convention::RightInvariant, noise());
        cfg.lever = sc.lever;
        let a = monte_carlo(&sc, &cfg, 4, 7, ExecMode::Sequential).unwrap();
        let b = monte_carlo(&sc, &cfg, 4, 7, ExecMode::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(a.mean_nees.is_finite() && a.mean_nis.is_finite());
        assert!(a.mean_nees > 3.0 && a.mean_nees < 60.0, "{}", a.mean_nees);
    }

    fn observability_fixture(conv: Convention, kind: ProfileKind) -> (Vec<GroupElement>, Vec<f64>, Vec<ImuSample>, EarthModel) {
        let earth = EarthModel::default();
        let mut sc = scenario("figure8").unwrap();
        sc.trajectory.kind = kind;
        sc.trajectory.duration = 10.0;
        let truth = generate_truth(&sc.trajectory, &earth).unwrap();
        let imu = synthesize_imu(&Profile::new(sc.trajectory, earth).unwrap(), &SensorErrorSpec::perfect()).unwrap();
        let _ = conv;
        (truth.iter().map(|p| p.x).collect(), truth.iter().map(|p| p.t).collect(), imu, earth)
    }

    #[test]
    fn observability_single_epoch_and_shapes() {
        let (traj, times, imu, earth) = observability_fixture(Convention::RightInvariant, ProfileKind::FigureEight);
        for conv in CONVS {
            let rep = observability_matrix(conv, &traj, &times, &imu, 100, 1, &LeverArm::default(), &earth, 1e-8).unwrap();
            assert!(rep.rank <= 3);
            assert_eq!(rep.null_space.ncols(), 15 - rep.rank);
            let rep = observability_matrix(conv, &traj, &times, &imu, 100, 10, &LeverArm::default(), &earth, 1e-8).unwrap();
            assert_eq!(rep.m.nrows(), 30);
            assert_eq!(rep.null_space.ncols(), 15 - rep.rank);
            let mv = &rep.m * &rep.null_space;
            assert!(mv.norm() <= 1e-6 * rep.singular_values[0] * (15 - rep.rank).max(1) as f64);
        }
        assert!(observability_matrix(Convention::LeftInvariant, &traj, &times, &imu, 100, 200, &LeverArm::default(), &earth, 1e-8).is_err());
    }

    #[test]
    fn observability_rank_survives_left_translation() {
        let (traj, times, imu, earth) = observability_fixture(Convention::LeftInvariant, ProfileKind::ConstantTurn);
        let a = GroupElement {
            rot: so3_exp(&Vec3::new(0.02, -0.01, 0.03)),
            vel: Vec3::new(0.5, -0.2, 0.1),
            pos: Vec3::new(30.0, -10.0, 5.0),
            frame: FrameTag::EcefIb,
        };
        let moved: Vec<GroupElement> = traj.iter().map(|x| a.compose(x)).collect();
        for conv in CONVS {
            let r0 = observability_matrix(conv, &traj, &times, &imu, 100, 10, &LeverArm::default(), &earth, 1e-8).unwrap();
            let r1 = observability_matrix(conv, &moved, &times, &imu, 100, 10, &LeverArm::default(), &earth, 1e-8).unwrap();
            assert_eq!(r0.rank, r1.rank, "{conv:?}");
        }
    }
}
