//! Synthetic ground truth, inverse-kinematics IMU synthesis, sensor
//! corruption and GNSS fixes.
//!
//! Profiles are closed-form curves in the tangent plane at the origin site,
//! carried rigidly into ECEF: `r = r₀ + C_n^e p(t)`, `C_b^e = C_n^e R_z(ψ(t))`.
//! States are in the ECEF_IB form `(C_b^e, v_ib^e, r_eb^e)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::earth::{c_n_e, EarthModel, Geodetic};
use crate::error::{Error, Result};
use crate::errordyn::LeverArm;
use crate::kinematics::{mechanize_ecef_increment, ImuSample};
use crate::liegroup::{skew, FrameTag, GroupElement, Mat3, Rotation, Vec3};
use crate::numeric::gauss_legendre;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ProfileKind {
    Static,
    ConstantTurn,
    FigureEight,
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileKind::Static => "static",
            ProfileKind::ConstantTurn => "constant-turn",
            ProfileKind::FigureEight => "figure-eight",
        })
    }
}

impl FromStr for ProfileKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(ProfileKind::Static),
            "constant-turn" => Ok(ProfileKind::ConstantTurn),
            "figure-eight" => Ok(ProfileKind::FigureEight),
            other => Err(Error::InvalidParameter(format!("unknown profile {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySpec {
    pub kind: ProfileKind,
    pub origin: Geodetic,
    /// Initial heading from north, rad.
    pub heading: f64,
    /// m/s
    pub speed: f64,
    /// rad/s
    pub turn_rate: f64,
    /// s
    pub duration: f64,
    /// Hz
    pub imu_rate: f64,
    /// Hz
    pub gnss_rate: f64,
}

fn integer_ratio(what: &str, x: f64) -> Result<usize> {
    let n = x.round();
    if !(n >= 1.0 && (x - n).abs() <= 1e-9 * n) {
        return Err(Error::InvalidParameter(format!("{what} must be a positive integer, got {x}")));
    }
    Ok(n as usize)
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("duration", self.duration), ("imu_rate", self.imu_rate), ("gnss_rate", self.gnss_rate)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("speed", self.speed), ("turn_rate", self.turn_rate), ("heading", self.heading)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
            }
        }
        if self.kind == ProfileKind::FigureEight && self.turn_rate == 0.0 {
            return Err(Error::InvalidParameter("figure-eight needs a nonzero turn_rate".into()));
        }
        if self.gnss_rate > self.imu_rate {
            return Err(Error::InvalidParameter("gnss_rate exceeds imu_rate".into()));
        }
        integer_ratio("duration * imu_rate", self.duration * self.imu_rate)?;
        integer_ratio("imu_rate / gnss_rate", self.imu_rate / self.gnss_rate)?;
        Ok(())
    }

    /// Number of IMU intervals.
    pub fn imu_samples(&self) -> usize {
        (self.duration * self.imu_rate).round() as usize
    }

    pub fn imu_time(&self, k: usize) -> f64 {
        k as f64 / self.imu_rate
    }
}

/// Truth at one instant with the instantaneous rates that produce it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruthPoint {
    pub t: f64,
    pub x: GroupElement,
    pub omega_ib_b: Vec3,
    pub f_b: Vec3,
}

/// Time derivative of an ECEF_IB state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateRate {
    pub rot: Mat3,
    pub vel: Vec3,
    pub pos: Vec3,
}

/// Closed-form evaluator of a trajectory.
#[derive(Clone, Debug)]
pub struct Profile {
    pub spec: TrajectorySpec,
    pub earth: EarthModel,
    c_ne: Mat3,
    r0: Vec3,
}

struct Planar {
    p: Vec3,
    dp: Vec3,
    ddp: Vec3,
    psi: f64,
    dpsi: f64,
}

impl Profile {
    pub fn new(spec: TrajectorySpec, earth: EarthModel) -> Result<Self> {
        spec.validate()?;
        earth.validate()?;
        let c_ne = *c_n_e(spec.origin.lat, spec.origin.lon).mat();
        let r0 = earth.geodetic_to_ecef(&spec.origin);
        Ok(Profile { spec, earth, c_ne, r0 })
    }

    fn planar(&self, t: f64) -> Planar {
        let s = &self.spec;
        let (v, w) = (s.speed, s.turn_rate);
        let (q, dq, ddq, psi, dpsi) = match s.kind {
            ProfileKind::Static => (Vec3::zeros(), Vec3::zeros(), Vec3::zeros(), 0.0, 0.0),
            ProfileKind::ConstantTurn if w == 0.0 => (Vec3::new(v * t, 0.0, 0.0), Vec3::new(v, 0.0, 0.0), Vec3::zeros(), 0.0, 0.0),
            ProfileKind::ConstantTurn => {
                let (sn, cs) = (w * t).sin_cos();
                let rho = v / w;
                (Vec3::new(rho * sn, rho * (1.0 - cs), 0.0), Vec3::new(v * cs, v * sn, 0.0), Vec3::new(-v * w * sn, v * w * cs, 0.0), w * t, w)
            }
            ProfileKind::FigureEight => {
                let a = v / w;
                let (s1, c1) = (w * t).sin_cos();
                let (s2, c2) = (2.0 * w * t).sin_cos();
                let dq = Vec3::new(a * w * c1, a * w * c2, 0.0);
                let ddq = Vec3::new(-a * w * w * s1, -2.0 * a * w * w * s2, 0.0);
                let psi = dq.y.atan2(dq.x);
                let dpsi = (dq.x * ddq.y - dq.y * ddq.x) / (dq.x * dq.x + dq.y * dq.y);
                (Vec3::new(a * s1, 0.5 * a * s2, 0.0), dq, ddq, psi, dpsi)
            }
        };
        let rz = *Rotation::about_z(s.heading).mat();
        Planar { p: rz * q, dp: rz * dq, ddp: rz * ddq, psi: s.heading + psi, dpsi }
    }

    /// State and instantaneous IMU rates at `t`.
    pub fn at(&self, t: f64) -> TruthPoint {
        let pl = self.planar(t);
        let w = self.earth.omega_ie_e();
        let c = self.c_ne * Rotation::about_z(pl.psi).mat();
        let r = self.r0 + self.c_ne * pl.p;
        let v_eb = self.c_ne * pl.dp;
        let a_eb = self.c_ne * pl.ddp;
        let omega_ib_b = Vec3::new(0.0, 0.0, pl.dpsi) + c.transpose() * w;
        let f_b = c.transpose() * (a_eb + 2.0 * w.cross(&v_eb) + w.cross(&w.cross(&r)) - self.earth.gravitation(&r));
        let x = GroupElement { rot: Rotation::from_matrix_unchecked(c), vel: v_eb + w.cross(&r), pos: r, frame: FrameTag::EcefIb };
        TruthPoint { t, x, omega_ib_b, f_b }
    }

    /// Analytic `(Ċ_b^e, v̇_ib^e, ṙ_eb^e)` at `t`.
    pub fn rate(&self, t: f64) -> StateRate {
        let pl = self.planar(t);
        let w = self.earth.omega_ie_e();
        let c = self.c_ne * Rotation::about_z(pl.psi).mat();
        let v_eb = self.c_ne * pl.dp;
        StateRate { rot: c * skew(&Vec3::new(0.0, 0.0, pl.dpsi)), vel: self.c_ne * pl.ddp + w.cross(&v_eb), pos: v_eb }
    }
}

/// Truth at every IMU epoch `t_k = k / imu_rate`, `k = 0..=N`.
pub fn generate_truth(spec: &TrajectorySpec, earth: &EarthModel) -> Result<Vec<TruthPoint>> {
    let profile = Profile::new(*spec, *earth)?;
    Ok((0..=spec.imu_samples()).map(|k| profile.at(spec.imu_time(k))).collect())
}

/// Constant biases and white-noise PSDs of the simulated sensors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorErrorSpec {
    pub gyro_bias: Vec3,
    pub accel_bias: Vec3,
    /// rad²/s
    pub gyro_psd: f64,
    /// m²/s³
    pub accel_psd: f64,
    pub seed: u64,
}

impl SensorErrorSpec {
    pub fn perfect() -> Self {
        SensorErrorSpec { gyro_bias: Vec3::zeros(), accel_bias: Vec3::zeros(), gyro_psd: 0.0, accel_psd: 0.0, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gyro_psd", self.gyro_psd), ("accel_psd", self.accel_psd)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be a finite non-negative PSD, got {v}")));
            }
        }
        Ok(())
    }
}

fn normal3(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng))
}

/// IMU samples `k = 1..=N`; sample `k` holds the mean rates over
/// `(t_{k−1}, t_k]` plus bias and white noise of variance `PSD · rate`.
pub fn synthesize_imu(profile: &Profile, errors: &SensorErrorSpec) -> Result<Vec<ImuSample>> {
    errors.validate()?;
    let spec = &profile.spec;
    let mut rng = ChaCha8Rng::seed_from_u64(errors.seed);
    let (sg, sa) = ((errors.gyro_psd * spec.imu_rate).sqrt(), (errors.accel_psd * spec.imu_rate).sqrt());
    let h = 1.0 / spec.imu_rate;
    (1..=spec.imu_samples())
        .map(|k| {
            let (a, b) = (spec.imu_time(k - 1), spec.imu_time(k));
            let mean = gauss_legendre(
                |t| {
                    let p = profile.at(t);
                    nalgebra::Matrix3x2::from_columns(&[p.omega_ib_b, p.f_b])
                },
                a,
                b,
            ) / h;
            let gyro = mean.column(0) + errors.gyro_bias + normal3(&mut rng) * sg;
            let accel = mean.column(1) + errors.accel_bias + normal3(&mut rng) * sa;
            ImuSample::new(b, gyro, accel)
        })
        .collect()
}

/// A GNSS antenna-position fix in ECEF with its covariance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GnssFix {
    pub t: f64,
    pub pos: Vec3,
    pub cov: Mat3,
}

/// Symmetric square root of a PSD matrix.
fn psd_sqrt(cov: &Mat3) -> Result<Mat3> {
    if (cov - cov.transpose()).abs().max() > 1e-12 * cov.abs().max().max(1e-300) {
        return Err(Error::InvalidParameter("GNSS covariance is not symmetric".into()));
    }
    let eig = SymmetricEigen::new(*cov);
    if eig.eigenvalues.min() < -1e-12 * eig.eigenvalues.max().abs() {
        return Err(Error::InvalidParameter("GNSS covariance is not positive semidefinite".into()));
    }
    let d = Mat3::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    Ok(eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Fixes of `r + C l^b` at `t = j / rate`, `j ≥ 1`, taken from the truth
/// samples at those epochs.
pub fn synthesize_gnss(truth: &[TruthPoint], lever: &LeverArm, rate: f64, cov: &Mat3, seed: u64) -> Result<Vec<GnssFix>> {
    if truth.len() < 2 {
        return Err(Error::InvalidParameter("truth needs at least two samples".into()));
    }
    let imu_rate = 1.0 / (truth[1].t - truth[0].t);
    let stride = integer_ratio("imu_rate / gnss_rate", imu_rate / rate)?;
    let root = psd_sqrt(cov)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(truth
        .iter()
        .skip(stride)
        .step_by(stride)
        .map(|p| GnssFix { t: p.t, pos: p.x.pos + p.x.rot.mat() * lever.l_b + root * normal3(&mut rng), cov: *cov })
        .collect())
}

/// Neumaier-compensated `sum += x`, carrying the lost low part in `lo`.
fn compensated_add(sum: &mut Vec3, lo: &mut Vec3, x: &Vec3) {
    for i in 0..3 {
        let t = sum[i] + x[i];
        lo[i] += if sum[i].abs() >= x[i].abs() { (sum[i] - t) + x[i] } else { (x[i] - t) + sum[i] };
        sum[i] = t;
    }
}

/// Dead-reckons `x0` through `imu`, returning the state after every sample.
///
/// Velocity and position are accumulated from increments with compensated
/// summation: at ECEF magnitudes one ulp of position is ~1e-9 m, which would
/// otherwise build up over thousands of steps.
pub fn dead_reckon(x0: &GroupElement, t0: f64, imu: &[ImuSample], earth: &EarthModel) -> Result<Vec<GroupElement>> {
    let mut x = *x0;
    let (mut lo_v, mut lo_r) = (Vec3::zeros(), Vec3::zeros());
    let mut t = t0;
    let mut out = Vec::with_capacity(imu.len());
    for (k, s) in imu.iter().enumerate() {
        if !(s.t > t) {
            return Err(Error::NonMonotonicTime { epoch: k, t: s.t, prev: t });
        }
        let full = GroupElement { vel: x.vel + lo_v, pos: x.pos + lo_r, ..x };
        let inc = mechanize_ecef_increment(&full, s.gyro, s.accel, earth, s.t - t)?;
        // the increment is linear in the state, so the low parts enter through `full`
        x.rot = inc.rot;
        compensated_add(&mut x.vel, &mut lo_v, &inc.dvel);
        compensated_add(&mut x.pos, &mut lo_r, &inc.dpos);
        t = s.t;
        out.push(GroupElement { vel: x.vel + lo_v, pos: x.pos + lo_r, ..x });
    }
    Ok(out)
}

/// Exact gravitation change against the first-order models.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GravityPerturbationReport {
    /// `‖G(r+δr) − G(r)‖`
    pub exact_norm: f64,
    /// relative error of the isotropic model `−μ/‖r‖³ δr`
    pub isotropic_relative: f64,
    /// relative error of the full gradient `−μ/‖r‖³ (I − 3 r̂r̂ᵀ) δr`
    pub gradient_relative: f64,
    /// relative error of the down-component model with `+2g/(√(R_M R_N)+h)`
    pub down_plus_relative: f64,
    /// same with the opposite sign
    pub down_minus_relative: f64,
}

/// Compares `G(r+δr) − G(r)` with the first-order perturbation models. The
/// down-component models are compared with the down component of the exact
/// plumb-bob gravity change in the local NED frame at `r`.
pub fn gravity_perturbation_check(r: &Vec3, dr: &Vec3, earth: &EarthModel) -> Result<GravityPerturbationReport> {
    if !(r.norm() > 6e6) {
        return Err(Error::InvalidParameter(format!("position norm {} is inside the earth", r.norm())));
    }
    let exact = earth.gravitation(&(r + dr)) - earth.gravitation(r);
    let rn = r.norm();
    let k = earth.mu / rn.powi(3);
    let rhat = r / rn;
    let iso = -k * dr;
    let grad = -k * (dr - 3.0 * rhat * rhat.dot(dr));
    let scale = exact.norm().max(1e-300);
    let rel = |m: Vec3| (m - exact).norm() / scale;

    let geo = earth.ecef_to_geodetic(r);
    let c_ne = c_n_e(geo.lat, geo.lon);
    let to_n = c_ne.mat().transpose();
    let dr_d = (to_n * dr).z;
    let g_down = (to_n * earth.gravity(r)).z;
    let exact_down = (to_n * (earth.gravity(&(r + dr)) - earth.gravity(r))).z;
    let (rm, rn_) = earth.radii(geo.lat);
    let coeff = 2.0 * g_down / ((rm * rn_).sqrt() + geo.height);
    let down_scale = exact_down.abs().max(1e-300);
    Ok(GravityPerturbationReport {
        exact_norm: exact.norm(),
        isotropic_relative: rel(iso),
        gradient_relative: rel(grad),
        down_plus_relative: (coeff * dr_d - exact_down).abs() / down_scale,
        down_minus_relative: (-coeff * dr_d - exact_down).abs() / down_scale,
    })
}

/// A named simulation scenario.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scenario {
    pub trajectory: TrajectorySpec,
    pub sensor: SensorErrorSpec,
    /// Per-axis GNSS noise standard deviation, m.
    pub gnss_sigma: f64,
    pub lever: LeverArm,
}

pub const SCENARIOS: [&str; 3] = ["static", "S1", "figure8"];

/// Built-in scenarios. `S1` is the constant-turn Monte Carlo case.
pub fn scenario(name: &str) -> Result<Scenario> {
    let origin = Geodetic { lat: 0.7, lon: 0.2, height: 100.0 };
    let sensor =
        SensorErrorSpec { gyro_bias: Vec3::new(3e-6, -2e-6, 4e-6), accel_bias: Vec3::new(5e-3, -4e-3, 6e-3), gyro_psd: 1e-9, accel_psd: 1e-6, seed: 1 };
    let traj = |kind, speed, turn_rate, duration, imu_rate| TrajectorySpec { kind, origin, heading: 0.3, speed, turn_rate, duration, imu_rate, gnss_rate: 1.0 };
    let trajectory = match name {
        "static" => traj(ProfileKind::Static, 0.0, 0.0, 60.0, 200.0),
        "S1" => traj(ProfileKind::ConstantTurn, 10.0, 0.05, 120.0, 100.0),
        "figure8" => traj(ProfileKind::FigureEight, 10.0, 0.1, 120.0, 100.0),
        other => return Err(Error::InvalidParameter(format!("unknown scenario {other:?}; known: {}", SCENARIOS.join(", ")))),
    };
    Ok(Scenario { trajectory, sensor, gnss_sigma: 1.0, lever: LeverArm { l_b: Vec3::new(0.5, 0.1, -0.3) } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{model_field, NavInputs};
    use crate::liegroup::so3_log;

    fn spec(kind: ProfileKind) -> TrajectorySpec {
        let mut s = scenario("S1").unwrap().trajectory;
        s.kind = kind;
        s.duration = 20.0;
        s
    }

    #[test]
    fn static_profile_literals() {
        let earth = EarthModel::default();
        let s = scenario("static").unwrap().trajectory;
        let truth = generate_truth(&s, &earth).unwrap();
        assert_eq!(truth.len(), 12001);
        let w = earth.omega_ie_e();
        for p in truth.iter().step_by(997) {
            assert!((p.x.vel - w.cross(&p.x.pos)).norm() <= 1e-9);
            let ct = p.x.rot.mat().transpose();
            assert!((p.omega_ib_b - ct * w).norm() <= 1e-18);
            assert!((p.f_b + ct * earth.gravity(&p.x.pos)).norm() <= 1e-12);
        }
        let profile = Profile::new(s, earth).unwrap();
        let imu = synthesize_imu(&profile, &SensorErrorSpec::perfect()).unwrap();
        assert_eq!(imu.len(), 12000);
        let ct = truth[0].x.rot.mat().transpose();
        assert!((imu[0].gyro - ct * w).norm() <= 1e-18);
        assert!((imu[0].accel + ct * earth.gravity(&truth[0].x.pos)).norm() <= 1e-12);
    }

    #[test]
    fn turn_speed_is_constant() {
        let earth = EarthModel::default();
        let profile = Profile::new(spec(ProfileKind::ConstantTurn), earth).unwrap();
        for k in 0..50 {
            let r = profile.rate(k as f64 * 0.37);
            assert!((r.pos.norm() - 10.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn truth_satisfies_model_dynamics() {
        let earth = EarthModel::default();
        for kind in [ProfileKind::Static, ProfileKind::ConstantTurn, ProfileKind::FigureEight] {
            let profile = Profile::new(spec(kind), earth).unwrap();
            for k in 0..40 {
                let t = k as f64 * 0.5;
                let p = profile.at(t);
                let u = NavInputs::ecef(&p.x, p.omega_ib_b, p.f_b, &earth).unwrap();
                let m = model_field(FrameTag::EcefIb, &p.x.to_matrix(), &u);
                let r = profile.rate(t);
                let d = (m.fixed_view::<3, 3>(0, 0) - r.rot).norm() + (m.fixed_view::<3, 1>(0, 3) - r.vel).norm() + (m.fixed_view::<3, 1>(0, 4) - r.pos).norm();
                assert!(d <= 1e-9, "{kind} t={t}: {d}");

                // central differences of the sampled truth
                let h = 1e-3;
                let (a, b) = (profile.at(t + h).x, profile.at(t - h).x);
                let fd_v = (a.vel - b.vel) / (2.0 * h);
                let fd_r = (a.pos - b.pos) / (2.0 * h);
                let fd_c = (a.rot.mat() - b.rot.mat()) / (2.0 * h);
                assert!((fd_v - r.vel).norm() <= 1e-6 * (1.0 + r.vel.norm()), "{kind}");
                assert!((fd_r - r.pos).norm() <= 1e-6 * (1.0 + r.pos.norm()), "{kind}");
                assert!((fd_c - r.rot).norm() <= 1e-6, "{kind}");
            }
        }
    }

    #[test]
    fn gravity_decomposition_identity() {
        let earth = EarthModel::default();
        let r = earth.geodetic_to_ecef(&Geodetic { lat: 0.4, lon: -1.0, height: 300.0 });
        let w = earth.omega_ie_e();
        let sum = earth.gravity(&r) + w.cross(&w.cross(&r)) * -1.0 * -1.0;
        // g + (ω×)²r = G, with (ω×)²r = ω×(ω×r)
        assert!((sum - earth.gravitation(&r)).norm() <= 1e-14 * earth.gravitation(&r).norm());
    }

    #[test]
    fn dead_reckoning_closes_over_a_minute() {
        let earth = EarthModel::default();
        for kind in [ProfileKind::Static, ProfileKind::ConstantTurn] {
            let mut s = spec(kind);
            s.duration = 60.0;
            s.imu_rate = 200.0;
            let profile = Profile::new(s, earth).unwrap();
            let truth = generate_truth(&s, &earth).unwrap();
            let imu = synthesize_imu(&profile, &SensorErrorSpec::perfect()).unwrap();
            let path = dead_reckon(&truth[0].x, 0.0, &imu, &earth).unwrap();
            let mut worst = (0.0f64, 0.0f64);
            for (x, p) in path.iter().zip(&truth[1..]) {
                worst.0 = worst.0.max((x.pos - p.x.pos).norm());
                worst.1 = worst.1.max(so3_log(&x.rot.transpose().compose(&p.x.rot)).norm());
            }
            assert!(worst.0 <= 1e-6 && worst.1 <= 1e-8, "{kind}: {worst:?}");
        }
    }

    #[test]
    fn imu_noise_is_seeded() {
        let earth = EarthModel::default();
        let sc = scenario("S1").unwrap();
        let mut s = sc.trajectory;
        s.duration = 2.0;
        let profile = Profile::new(s, earth).unwrap();
        let a = synthesize_imu(&profile, &sc.sensor).unwrap();
        let b = synthesize_imu(&profile, &sc.sensor).unwrap();
        assert_eq!(a, b);
        let c = synthesize_imu(&profile, &SensorErrorSpec { seed: 2, ..sc.sensor }).unwrap();
        assert_ne!(a, c);
        let clean = synthesize_imu(&profile, &SensorErrorSpec { gyro_psd: 0.0, accel_psd: 0.0, ..sc.sensor }).unwrap();
        let perfect = synthesize_imu(&profile, &SensorErrorSpec::perfect()).unwrap();
        assert!((clean[5].gyro - perfect[5].gyro - sc.sensor.gyro_bias).norm() <= 1e-15);
        // sample standard deviation of the accelerometer noise
        let n = a.len() as f64;
        let var = a.iter().zip(&clean).map(|(x, y)| (x.accel - y.accel).norm_squared()).sum::<f64>() / (3.0 * n);
        let expect = sc.sensor.accel_psd * s.imu_rate;
        assert!((var / expect - 1.0).abs() < 0.2, "{var} vs {expect}");
    }

    #[test]
    fn gnss_fixes() {
        let earth = EarthModel::default();
        let s = spec(ProfileKind::ConstantTurn);
        let truth = generate_truth(&s, &earth).unwrap();
        let zero = Mat3::zeros();
        let fixes = synthesize_gnss(&truth, &LeverArm::default(), 1.0, &zero, 3).unwrap();
        assert_eq!(fixes.len(), 20);
        assert_eq!(fixes[0].t, 1.0);
        assert_eq!(fixes[0].pos, truth[100].x.pos);
        let lever = LeverArm { l_b: Vec3::new(1.0, -0.5, 0.2) };
        let fixes = synthesize_gnss(&truth, &lever, 1.0, &zero, 3).unwrap();
        assert!((fixes[3].pos - (truth[400].x.pos + truth[400].x.rot.mat() * lever.l_b)).norm() <= 1e-9);
        assert!(synthesize_gnss(&truth, &lever, 0.3, &zero, 3).is_err());

        // sample covariance of 10⁴ fixes
        let mut long = s;
        long.duration = 10_000.0;
        long.imu_rate = 1.0;
        let stat = TrajectorySpec { kind: ProfileKind::Static, ..long };
        let truth = generate_truth(&stat, &earth).unwrap();
        let cov = Mat3::new(4.0, 1.0, 0.5, 1.0, 2.0, -0.3, 0.5, -0.3, 1.0);
        let fixes = synthesize_gnss(&truth, &LeverArm::default(), 1.0, &cov, 11).unwrap();
        let mut sample = Mat3::zeros();
        for (f, p) in fixes.iter().zip(&truth[1..]) {
            let e = f.pos - p.x.pos;
            sample += e * e.transpose();
        }
        sample /= fixes.len() as f64;
        for i in 0..3 {
            assert!((sample[(i, i)] / cov[(i, i)] - 1.0).abs() < 0.1);
        }
        assert!((sample - cov).norm() / cov.norm() < 0.1);
    }

    #[test]
    fn gravity_perturbation_models() {
        let earth = EarthModel::default();
        let r = earth.geodetic_to_ecef(&Geodetic { lat: 0.7, lon: 0.2, height: 100.0 });
        let zero = gravity_perturbation_check(&r, &Vec3::zeros(), &earth).unwrap();
        assert_eq!(zero.exact_norm, 0.0);
        let rhat = r.normalize();
        let radial = gravity_perturbation_check(&r, &(rhat * 100.0), &earth).unwrap();
        // the full gradient is first-order exact; the isotropic model has the
        // wrong radial sign and factor (−1 against +2)
        assert!(radial.gradient_relative <= 5e-5, "{radial:?}");
        assert!((radial.isotropic_relative - 1.5).abs() < 1e-3, "{radial:?}");
        let tangent = rhat.cross(&Vec3::z()).normalize() * 100.0;
        let tang = gravity_perturbation_check(&r, &tangent, &earth).unwrap();
        assert!(tang.isotropic_relative <= 5e-5 && tang.gradient_relative <= 5e-5, "{tang:?}");
        // down is positive: moving down increases the down component
        let geo = earth.ecef_to_geodetic(&r);
        let down = c_n_e(geo.lat, geo.lon).mat() * Vec3::new(0.0, 0.0, 10.0);
        let d = gravity_perturbation_check(&r, &down, &earth).unwrap();
        assert!(d.down_plus_relative < 0.05 && d.down_minus_relative > 1.9, "{d:?}");
        assert!(gravity_perturbation_check(&Vec3::new(1.0, 0.0, 0.0), &Vec3::zeros(), &earth).is_err());
    }

    #[test]
    fn scenarios_and_validation() {
        for name in SCENARIOS {
            scenario(name).unwrap().trajectory.validate().unwrap();
        }
        assert!(scenario("S9").is_err());
        let mut s = spec(ProfileKind::ConstantTurn);
        s.gnss_rate = 3.0;
        assert!(s.validate().is_err());
        s.gnss_rate = 1000.0;
        assert!(s.validate().is_err());
        assert_eq!("figure-eight".parse::<ProfileKind>().unwrap(), ProfileKind::FigureEight);
    }
}
