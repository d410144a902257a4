//! SO(3) and SE₂(3) algebra.
//!
//! Group elements are kept in factored form `(R, v, p)`; the 5×5 embedding
//!
//! ```text
//!     | R  v  p |
//! X = | 0  1  0 |
//!     | 0  0  1 |
//! ```
//!
//! is only materialised by [`GroupElement::to_matrix`] for verification code.
//! Tangent vectors are ordered `(φ, ρ_v, ρ_r)`.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat5 = SMatrix<f64, 5, 5>;
pub type Mat9 = SMatrix<f64, 9, 9>;
pub type Vec9 = SVector<f64, 9>;

/// Below this rotation angle the Γ coefficients are evaluated by their
/// Taylor series instead of the trigonometric closed forms.
///
/// The closed form of the `φ×²` coefficient of Γ₃ loses about `ε/θ⁴` to
/// cancellation, so the switch sits well above the usual 1e-4.
pub const SERIES_THRESHOLD: f64 = 1.0;

/// Frame convention of a navigation state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameTag {
    /// `(C_b^n, v_eb^n, r_eb^n)`
    #[serde(rename = "NED_EB")]
    NedEb,
    /// `(C_b^n, v_ib^n, r_ib^n)`
    #[serde(rename = "NED_IB")]
    NedIb,
    /// `(C_b^e, v_eb^e, r_eb^e)`
    #[serde(rename = "ECEF_EB")]
    EcefEb,
    /// `(C_b^e, v_ib^e, r_ib^e)`, the transformed mechanization used by the filter.
    #[serde(rename = "ECEF_IB")]
    EcefIb,
}

impl FrameTag {
    pub const ALL: [FrameTag; 4] = [FrameTag::NedEb, FrameTag::NedIb, FrameTag::EcefEb, FrameTag::EcefIb];

    pub fn is_ned(self) -> bool {
        matches!(self, FrameTag::NedEb | FrameTag::NedIb)
    }

    pub fn is_inertial_velocity(self) -> bool {
        matches!(self, FrameTag::NedIb | FrameTag::EcefIb)
    }

    pub fn name(self) -> &'static str {
        match self {
            FrameTag::NedEb => "NED_EB",
            FrameTag::NedIb => "NED_IB",
            FrameTag::EcefEb => "ECEF_EB",
            FrameTag::EcefIb => "ECEF_IB",
        }
    }
}

pub(crate) fn check_finite<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Skew-symmetric matrix `v×` such that `(v×) w = v × w`.
#[inline]
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`]; reads the antisymmetric part of `m`.
#[inline]
pub fn vee(m: &Mat3) -> Vec3 {
    Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5
}

/// `Σ_k (-1)^k θ^{2k} / (2k + j)!`, the coefficient family behind every Γₘ.
///
/// `Γₘ(φ) = I/m! + a_{m+1}(θ) φ× + a_{m+2}(θ) φ×²`.
fn gamma_coeff(j: usize, theta: f64) -> f64 {
    if theta < SERIES_THRESHOLD {
        let t2 = theta * theta;
        // Horner over k = 0..=10; the first neglected term is below 1e-19 relative.
        let mut fact = 1.0;
        for i in 1..=j {
            fact *= i as f64;
        }
        let mut terms = [0.0; 11];
        let mut f = fact;
        for (k, term) in terms.iter_mut().enumerate() {
            if k > 0 {
                f *= ((2 * k + j - 1) * (2 * k + j)) as f64;
            }
            *term = if k % 2 == 0 { 1.0 / f } else { -1.0 / f };
        }
        terms.iter().rev().fold(0.0, |acc, c| acc * t2 + c)
    } else {
        let (s, c) = theta.sin_cos();
        let t2 = theta * theta;
        match j {
            1 => s / theta,
            2 => (1.0 - c) / t2,
            3 => (theta - s) / (t2 * theta),
            4 => (t2 + 2.0 * c - 2.0) / (2.0 * t2 * t2),
            5 => (t2 * theta - 6.0 * theta + 6.0 * s) / (6.0 * t2 * t2 * theta),
            _ => unreachable!("gamma coefficient index {j}"),
        }
    }
}

/// `Γₘ(φ) = Σₙ (φ×)ⁿ / (n+m)!` for `m ∈ 0..=3`.
///
/// Γ₀ is the SO(3) exponential and Γ₁ the left Jacobian of SO(3).
pub fn gamma(m: usize, phi: &Vec3) -> Mat3 {
    assert!(m <= 3, "gamma is defined for m in 0..=3, got {m}");
    let theta = phi.norm();
    let w = skew(phi);
    let inv_fact = [1.0, 1.0, 0.5, 1.0 / 6.0][m];
    Mat3::identity() * inv_fact + w * gamma_coeff(m + 1, theta) + w * w * gamma_coeff(m + 2, theta)
}

/// Inverse of the SO(3) left Jacobian, `Γ₁(φ)⁻¹`, valid for `‖φ‖ < 2π`.
pub fn gamma1_inv(phi: &Vec3) -> Mat3 {
    let theta = phi.norm();
    let w = skew(phi);
    let c = if theta < 1e-2 {
        let t2 = theta * theta;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    } else {
        let (s, co) = theta.sin_cos();
        (1.0 - theta * s / (2.0 * (1.0 - co))) / (theta * theta)
    };
    Mat3::identity() - w * 0.5 + w * w * c
}

/// A direction cosine matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub const ORTHO_TOL: f64 = 1e-9;

    /// Validates orthogonality and orientation.
    pub fn new(m: Mat3) -> Result<Self> {
        check_finite(&m, "rotation")?;
        let orth = (m.transpose() * m - Mat3::identity()).norm();
        let det = m.determinant();
        if orth > Self::ORTHO_TOL || (det - 1.0).abs() > Self::ORTHO_TOL {
            return Err(Error::NotRotation { orth, det });
        }
        Ok(Rotation(m))
    }

    /// Wraps a matrix the caller already knows to be a rotation.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Rotation(m)
    }

    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    pub fn exp(phi: &Vec3) -> Self {
        so3_exp(phi)
    }

    pub fn about_z(angle: f64) -> Self {
        so3_exp(&Vec3::new(0.0, 0.0, angle))
    }

    #[inline]
    pub fn mat(&self) -> &Mat3 {
        &self.0
    }

    #[inline]
    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    #[inline]
    pub fn compose(&self, other: &Rotation) -> Self {
        Rotation(self.0 * other.0)
    }

    /// Projects back onto SO(3), removing accumulated round-off.
    pub fn orthonormalized(&self) -> Self {
        let svd = self.0.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut r = u * vt;
        if r.determinant() < 0.0 {
            let mut u2 = u;
            u2.column_mut(2).neg_mut();
            r = u2 * vt;
        }
        Rotation(r)
    }
}

impl std::ops::Mul<Vec3> for &Rotation {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// SO(3) exponential (Rodrigues). Same code path as `gamma(0, ·)`.
pub fn so3_exp(phi: &Vec3) -> Rotation {
    Rotation(gamma(0, phi))
}

/// Which branch [`so3_log_branch`] took.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogBranch {
    Regular,
    /// trace(R) ≈ −1: the axis was read off the symmetric part of `R`.
    DegenerateRotation,
}

/// SO(3) logarithm with `‖φ‖ ≤ π`.
pub fn so3_log(r: &Rotation) -> Vec3 {
    so3_log_branch(r).0
}

/// SO(3) logarithm, also reporting whether the near-π branch was used.
pub fn so3_log_branch(r: &Rotation) -> (Vec3, LogBranch) {
    let m = r.mat();
    let c = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let w = vee(m);
    let s = w.norm();
    let theta = s.atan2(c);
    if c > -0.99 {
        let scale = if theta < 1e-4 {
            let t2 = theta * theta;
            1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0
        } else {
            theta / s
        };
        return (w * scale, LogBranch::Regular);
    }
    // (R + Rᵀ)/2 − cos θ I = (1 − cos θ) n nᵀ
    let b = (m + m.transpose()) * 0.5 - Mat3::identity() * c;
    let mut k = 0;
    for i in 1..3 {
        if b[(i, i)] > b[(k, k)] {
            k = i;
        }
    }
    let mut n = b.column(k).into_owned();
    n /= n.norm();
    if n.dot(&w) < 0.0 {
        n = -n;
    }
    (n * theta, LogBranch::DegenerateRotation)
}

/// An element of the Lie algebra 𝔰𝔢₂(3) in coordinates `(φ, ρ_v, ρ_r)`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Tangent9 {
    pub phi: Vec3,
    pub rho_v: Vec3,
    pub rho_r: Vec3,
}

impl Tangent9 {
    pub fn new(phi: Vec3, rho_v: Vec3, rho_r: Vec3) -> Self {
        Tangent9 { phi, rho_v, rho_r }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(x: &Vec9) -> Self {
        Tangent9 { phi: x.fixed_rows::<3>(0).into_owned(), rho_v: x.fixed_rows::<3>(3).into_owned(), rho_r: x.fixed_rows::<3>(6).into_owned() }
    }

    pub fn to_vector(&self) -> Vec9 {
        let mut x = Vec9::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&self.phi);
        x.fixed_rows_mut::<3>(3).copy_from(&self.rho_v);
        x.fixed_rows_mut::<3>(6).copy_from(&self.rho_r);
        x
    }

    pub fn scale(&self, k: f64) -> Self {
        Tangent9 { phi: self.phi * k, rho_v: self.rho_v * k, rho_r: self.rho_r * k }
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }

    /// 5×5 matrix form with zero bottom rows.
    pub fn hat(&self) -> Mat5 {
        let mut m = Mat5::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&self.phi));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.rho_v);
        m.fixed_view_mut::<3, 1>(0, 4).copy_from(&self.rho_r);
        m
    }

    /// Reads the top three rows of a 5×5 algebra element.
    pub fn vee(m: &Mat5) -> Self {
        Tangent9 {
            phi: vee(&m.fixed_view::<3, 3>(0, 0).into_owned()),
            rho_v: m.fixed_view::<3, 1>(0, 3).into_owned(),
            rho_r: m.fixed_view::<3, 1>(0, 4).into_owned(),
        }
    }
}

/// An SE₂(3) element `(R, v, p)` tagged with its frame convention.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupElement {
    pub rot: Rotation,
    pub vel: Vec3,
    pub pos: Vec3,
    pub frame: FrameTag,
}

impl GroupElement {
    pub fn new(rot: Rotation, vel: Vec3, pos: Vec3, frame: FrameTag) -> Result<Self> {
        check_finite(&vel, "velocity")?;
        check_finite(&pos, "position")?;
        Ok(GroupElement { rot, vel, pos, frame })
    }

    pub fn identity(frame: FrameTag) -> Self {
        GroupElement { rot: Rotation::identity(), vel: Vec3::zeros(), pos: Vec3::zeros(), frame }
    }

    pub fn with_frame(mut self, frame: FrameTag) -> Self {
        self.frame = frame;
        self
    }

    /// `self · other`; the result carries `self.frame`.
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        let r = self.rot.mat();
        GroupElement { rot: self.rot.compose(&other.rot), vel: r * other.vel + self.vel, pos: r * other.pos + self.pos, frame: self.frame }
    }

    pub fn inverse(&self) -> GroupElement {
        let rt = self.rot.transpose();
        GroupElement { rot: rt, vel: -(rt.mat() * self.vel), pos: -(rt.mat() * self.pos), frame: self.frame }
    }

    pub fn to_matrix(&self) -> Mat5 {
        let mut m = Mat5::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rot.mat());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.vel);
        m.fixed_view_mut::<3, 1>(0, 4).copy_from(&self.pos);
        m
    }

    /// Reads `(R, v, p)` from a 5×5 embedding, validating the rotation block.
    pub fn from_matrix(m: &Mat5, frame: FrameTag) -> Result<Self> {
        let rot = Rotation::new(m.fixed_view::<3, 3>(0, 0).into_owned())?;
        GroupElement::new(rot, m.fixed_view::<3, 1>(0, 3).into_owned(), m.fixed_view::<3, 1>(0, 4).into_owned(), frame)
    }

    /// 9×9 adjoint: `hat(Ad_X ξ) = X hat(ξ) X⁻¹`.
    pub fn adjoint(&self) -> Mat9 {
        let r = self.rot.mat();
        let mut ad = Mat9::zeros();
        for i in 0..3 {
            ad.fixed_view_mut::<3, 3>(3 * i, 3 * i).copy_from(r);
        }
        ad.fixed_view_mut::<3, 3>(3, 0).copy_from(&(skew(&self.vel) * r));
        ad.fixed_view_mut::<3, 3>(6, 0).copy_from(&(skew(&self.pos) * r));
        ad
    }

    /// Frobenius distance between 5×5 embeddings.
    pub fn distance(&self, other: &GroupElement) -> f64 {
        ((self.rot.mat() - other.rot.mat()).norm_squared() + (self.vel - other.vel).norm_squared() + (self.pos - other.pos).norm_squared()).sqrt()
    }
}

/// SE₂(3) exponential: `(Γ₀(φ), Γ₁(φ) ρ_v, Γ₁(φ) ρ_r)`.
pub fn se23_exp(xi: &Tangent9, frame: FrameTag) -> GroupElement {
    let j = gamma(1, &xi.phi);
    GroupElement { rot: so3_exp(&xi.phi), vel: j * xi.rho_v, pos: j * xi.rho_r, frame }
}

/// SE₂(3) logarithm, exact inverse of [`se23_exp`] for `‖φ‖ < π`.
pub fn se23_log(x: &GroupElement) -> Tangent9 {
    se23_log_branch(x).0
}

pub fn se23_log_branch(x: &GroupElement) -> (Tangent9, LogBranch) {
    let (phi, branch) = so3_log_branch(&x.rot);
    let jinv = if phi.norm() > std::f64::consts::PI - 1e-6 {
        // Γ₁ stays invertible at π; the closed-form inverse does not.
        gamma(1, &phi).try_inverse().expect("left Jacobian is invertible for |phi| <= pi")
    } else {
        gamma1_inv(&phi)
    };
    (Tangent9 { phi, rho_v: jinv * x.vel, rho_r: jinv * x.pos }, branch)
}
