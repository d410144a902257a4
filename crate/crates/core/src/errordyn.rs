//! Invariant error parametrisations, linearised error dynamics and the
//! GNSS measurement Jacobians, for states in the transformed ECEF frame.
//!
//! Conventions (δb = b − b̃, truth minus estimate, for both):
//!
//! * **Left**: `η = X̃⁻¹X = exp(ξ)`, error coordinates `ξ = log η` directly.
//! * **Right**: `η = X̃X⁻¹`. The attitude error is `φ` with
//!   `C̃Cᵀ = exp(−φ×)`, i.e. `η = exp((−φ, ρ_v, ρ_r))`. This is the sign for
//!   which the first-order relations `Jρ_v = δv + φ×v` and the `F` blocks
//!   `−G×`, `−C̃` hold.
//!
//! In both conventions the translation columns of `η` are `J(φ)ρ`, which equal
//! `ρ` to first order.

use std::fmt;
use std::str::FromStr;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::earth::EarthModel;
use crate::error::{Error, Result};
use crate::kinematics::ImuSample;
use crate::liegroup::{gamma, se23_exp, se23_log, skew, FrameTag, GroupElement, Mat3, Tangent9, Vec3};

pub type Mat15 = SMatrix<f64, 15, 15>;
pub type Vec15 = SVector<f64, 15>;
pub type Mat15x12 = SMatrix<f64, 15, 12>;
pub type Mat12 = SMatrix<f64, 12, 12>;
pub type Mat3x15 = SMatrix<f64, 3, 15>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Convention {
    #[serde(rename = "left")]
    LeftInvariant,
    #[serde(rename = "right")]
    RightInvariant,
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Convention::LeftInvariant => "left",
            Convention::RightInvariant => "right",
        })
    }
}

impl FromStr for Convention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Convention::LeftInvariant),
            "right" => Ok(Convention::RightInvariant),
            other => Err(Error::InvalidParameter(format!("convention must be left or right, got {other:?}"))),
        }
    }
}

/// Gyro and accelerometer bias estimates.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Biases {
    pub gyro: Vec3,
    pub accel: Vec3,
}

/// White-noise and random-walk power spectral densities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// rad²/s
    pub gyro_psd: f64,
    /// m²/s³
    pub accel_psd: f64,
    /// rad²/s³
    pub gyro_bias_psd: f64,
    /// m²/s⁵
    pub accel_bias_psd: f64,
}

impl NoiseParams {
    pub fn zero() -> Self {
        NoiseParams { gyro_psd: 0.0, accel_psd: 0.0, gyro_bias_psd: 0.0, accel_bias_psd: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in
            [("gyro_psd", self.gyro_psd), ("accel_psd", self.accel_psd), ("gyro_bias_psd", self.gyro_bias_psd), ("accel_bias_psd", self.accel_bias_psd)]
        {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be a finite non-negative PSD, got {v}")));
            }
        }
        Ok(())
    }

    /// Continuous noise covariance `Q_c` for `w = [w_g, w_a, w_bg, w_ba]`.
    pub fn qc(&self) -> Mat12 {
        let mut q = Mat12::zeros();
        for i in 0..3 {
            q[(i, i)] = self.gyro_psd;
            q[(3 + i, 3 + i)] = self.accel_psd;
            q[(6 + i, 6 + i)] = self.gyro_bias_psd;
            q[(9 + i, 9 + i)] = self.accel_bias_psd;
        }
        q
    }
}

/// GNSS antenna offset from the IMU in the body frame, m.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct LeverArm {
    pub l_b: Vec3,
}

/// The 15-dimensional error `(φ, ρ_v, ρ_r, δb_g, δb_a)` in one convention.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorState15 {
    pub phi: Vec3,
    pub rho_v: Vec3,
    pub rho_r: Vec3,
    pub db_g: Vec3,
    pub db_a: Vec3,
    pub convention: Convention,
}

impl ErrorState15 {
    pub fn zero(convention: Convention) -> Self {
        Self::from_vector(&Vec15::zeros(), convention)
    }

    pub fn from_parts(nav: Tangent9, db_g: Vec3, db_a: Vec3, convention: Convention) -> Self {
        ErrorState15 { phi: nav.phi, rho_v: nav.rho_v, rho_r: nav.rho_r, db_g, db_a, convention }
    }

    pub fn nav(&self) -> Tangent9 {
        Tangent9::new(self.phi, self.rho_v, self.rho_r)
    }

    pub fn to_vector(&self) -> Vec15 {
        let mut x = Vec15::zeros();
        for (i, v) in [self.phi, self.rho_v, self.rho_r, self.db_g, self.db_a].iter().enumerate() {
            x.fixed_rows_mut::<3>(3 * i).copy_from(v);
        }
        x
    }

    pub fn from_vector(x: &Vec15, convention: Convention) -> Self {
        let b = |i: usize| x.fixed_rows::<3>(3 * i).into_owned();
        ErrorState15 { phi: b(0), rho_v: b(1), rho_r: b(2), db_g: b(3), db_a: b(4), convention }
    }

    /// `J(φ)ρ_v`, the velocity column of `η`.
    pub fn jrho_v(&self) -> Vec3 {
        gamma(1, &self.signed_phi()) * self.rho_v
    }

    /// `J(φ)ρ_r`, the position column of `η`.
    pub fn jrho_r(&self) -> Vec3 {
        gamma(1, &self.signed_phi()) * self.rho_r
    }

    fn signed_phi(&self) -> Vec3 {
        match self.convention {
            Convention::LeftInvariant => self.phi,
            Convention::RightInvariant => -self.phi,
        }
    }
}

fn require_ecef_ib(x: &GroupElement) -> Result<()> {
    if x.frame != FrameTag::EcefIb {
        return Err(Error::FrameMismatch { expected: FrameTag::EcefIb, actual: x.frame });
    }
    Ok(())
}

fn require_same_frame(a: &GroupElement, b: &GroupElement) -> Result<()> {
    if a.frame != b.frame {
        return Err(Error::FrameMismatch { expected: a.frame, actual: b.frame });
    }
    Ok(())
}

/// Right-invariant error coordinates of `X` relative to the estimate `X̃`.
pub fn right_error(xhat: &GroupElement, x: &GroupElement) -> Result<Tangent9> {
    require_same_frame(xhat, x)?;
    let mut xi = se23_log(&xhat.compose(&x.inverse()));
    xi.phi = -xi.phi;
    Ok(xi)
}

/// Left-invariant error coordinates `log(X̃⁻¹X)`.
pub fn left_error(xhat: &GroupElement, x: &GroupElement) -> Result<Tangent9> {
    require_same_frame(xhat, x)?;
    Ok(se23_log(&xhat.inverse().compose(x)))
}

pub fn nav_error(conv: Convention, xhat: &GroupElement, x: &GroupElement) -> Result<Tangent9> {
    match conv {
        Convention::LeftInvariant => left_error(xhat, x),
        Convention::RightInvariant => right_error(xhat, x),
    }
}

/// Full 15-state error of truth `(x, b)` relative to the estimate `(xhat, bhat)`.
pub fn error_state(conv: Convention, xhat: &GroupElement, bhat: &Biases, x: &GroupElement, b: &Biases) -> Result<ErrorState15> {
    let nav = nav_error(conv, xhat, x)?;
    Ok(ErrorState15::from_parts(nav, b.gyro - bhat.gyro, b.accel - bhat.accel, conv))
}

/// Exact inverse of [`nav_error`]: the state whose error relative to `xhat` is `xi`.
pub fn retract(conv: Convention, xhat: &GroupElement, xi: &Tangent9) -> GroupElement {
    match conv {
        Convention::LeftInvariant => xhat.compose(&se23_exp(xi, xhat.frame)),
        Convention::RightInvariant => {
            let eta = se23_exp(&Tangent9::new(-xi.phi, xi.rho_v, xi.rho_r), xhat.frame);
            eta.inverse().compose(xhat)
        }
    }
}

/// Inverse of [`retract`] in the other argument: the estimate `X̃` for which
/// truth `x` has error `xi`.
pub fn estimate_with_error(conv: Convention, x: &GroupElement, xi: &Tangent9) -> GroupElement {
    match conv {
        Convention::LeftInvariant => x.compose(&se23_exp(&xi.scale(-1.0), x.frame)),
        Convention::RightInvariant => se23_exp(&Tangent9::new(-xi.phi, xi.rho_v, xi.rho_r), x.frame).compose(x),
    }
}

fn put(m: &mut Mat15, row: usize, col: usize, block: &Mat3) {
    m.fixed_view_mut::<3, 3>(3 * row, 3 * col).copy_from(block);
}

/// Continuous-time error dynamics matrix `F`.
///
/// `imu` holds bias-corrected rates `(ω̃, f̃)`; the right-invariant `F` uses
/// `G_ib^e` at the estimated position.
pub fn f_matrix(conv: Convention, xhat: &GroupElement, imu: &ImuSample, earth: &EarthModel) -> Result<Mat15> {
    require_ecef_ib(xhat)?;
    let mut f = Mat15::zeros();
    let i3 = Mat3::identity();
    match conv {
        Convention::LeftInvariant => {
            let w = skew(&imu.gyro);
            for k in 0..3 {
                put(&mut f, k, k, &-w);
            }
            put(&mut f, 1, 0, &-skew(&imu.accel));
            put(&mut f, 2, 1, &i3);
            put(&mut f, 0, 3, &-i3);
            put(&mut f, 1, 4, &-i3);
        }
        Convention::RightInvariant => {
            let w = skew(&earth.omega_ie_e());
            let c = xhat.rot.mat();
            for k in 0..3 {
                put(&mut f, k, k, &-w);
            }
            put(&mut f, 1, 0, &-skew(&earth.gravitation(&xhat.pos)));
            put(&mut f, 2, 1, &i3);
            put(&mut f, 0, 3, &-c);
            put(&mut f, 1, 3, &(skew(&xhat.vel) * c));
            put(&mut f, 1, 4, c);
            put(&mut f, 2, 3, &(skew(&xhat.pos) * c));
        }
    }
    Ok(f)
}

/// Noise input matrix for `w = [w_g, w_a, w_bg, w_ba]`.
pub fn g_matrix(conv: Convention, xhat: &GroupElement) -> Result<Mat15x12> {
    require_ecef_ib(xhat)?;
    let mut g = Mat15x12::zeros();
    let i3 = Mat3::identity();
    let mut set = |r: usize, c: usize, b: &Mat3| g.fixed_view_mut::<3, 3>(3 * r, 3 * c).copy_from(b);
    match conv {
        Convention::LeftInvariant => {
            set(0, 0, &-i3);
            set(1, 1, &-i3);
        }
        Convention::RightInvariant => {
            let c = xhat.rot.mat();
            set(0, 0, &-c);
            set(1, 0, &(skew(&xhat.vel) * c));
            set(1, 1, c);
            set(2, 0, &(skew(&xhat.pos) * c));
        }
    }
    set(3, 2, &i3);
    set(4, 3, &i3);
    Ok(g)
}

/// Predicted antenna position `r̃ + C̃ l^b`.
pub fn predicted_antenna(xhat: &GroupElement, lever: &LeverArm) -> Vec3 {
    xhat.pos + xhat.rot.mat() * lever.l_b
}

/// Jacobian of the innovation `z = y − (r̃ + C̃l)` with respect to the error state.
///
/// Right: `[−(r̃ + C̃l)×, 0, −I, 0, 0]`; left: `[−C̃(l×), 0, C̃, 0, 0]`.
pub fn h_matrix(conv: Convention, xhat: &GroupElement, lever: &LeverArm) -> Result<Mat3x15> {
    require_ecef_ib(xhat)?;
    let mut h = Mat3x15::zeros();
    let c = xhat.rot.mat();
    match conv {
        Convention::LeftInvariant => {
            h.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-c * skew(&lever.l_b)));
            h.fixed_view_mut::<3, 3>(0, 6).copy_from(c);
        }
        Convention::RightInvariant => {
            h.fixed_view_mut::<3, 3>(0, 0).copy_from(&-skew(&predicted_antenna(xhat, lever)));
            h.fixed_view_mut::<3, 3>(0, 6).copy_from(&-Mat3::identity());
        }
    }
    Ok(h)
}

/// Applies an estimated error to the state: exact group retraction for the
/// navigation part, `b ← b̃ + δb` for the biases.
pub fn apply_feedback(conv: Convention, xhat: &GroupElement, bhat: &Biases, dx: &ErrorState15) -> Result<(GroupElement, Biases)> {
    if dx.convention != conv {
        return Err(Error::InvalidParameter(format!("error state is {} but filter is {}", dx.convention, conv)));
    }
    let x = retract(conv, xhat, &dx.nav());
    Ok((x, Biases { gyro: bhat.gyro + dx.db_g, accel: bhat.accel + dx.db_a }))
}
