//! Closed-form discrete state transition matrices for both error conventions,
//! the Ψ integrals, and process-noise discretisation.
//!
//! The right-invariant Φ follows the estimate over the interval with the
//! attitude `C̃(s) = Γ₀(−ω_ie s) C̃_k Γ₀(ω̃ s)` and with the body-frame velocity
//! `ṽ^b = C̃_kᵀṽ_k` and position `p̃^b = C̃_kᵀr̃_k` held fixed. For a stationary
//! estimate this coincides with freezing `F_r` at `t_k`; otherwise the
//! difference is O(Δt²).

use serde::Serialize;

use crate::earth::EarthModel;
use crate::error::{Error, Result};
use crate::errordyn::{f_matrix, Convention, Mat15, Mat15x12, NoiseParams};
use crate::kinematics::ImuSample;
use crate::liegroup::{check_finite, gamma, skew, FrameTag, GroupElement, Mat3, Vec3};
use crate::numeric::{integrate_adaptive, simpson};

/// A 15×15 transition matrix over one interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionBlocks {
    pub phi: Mat15,
    pub convention: Convention,
    pub dt: f64,
}

impl TransitionBlocks {
    pub fn identity(convention: Convention) -> Self {
        TransitionBlocks { phi: Mat15::identity(), convention, dt: 0.0 }
    }

    /// The 3×3 block at block row `i`, block column `j` (zero based).
    pub fn block(&self, i: usize, j: usize) -> Mat3 {
        self.phi.fixed_view::<3, 3>(3 * i, 3 * j).into_owned()
    }

    fn set(&mut self, i: usize, j: usize, b: &Mat3) {
        self.phi.fixed_view_mut::<3, 3>(3 * i, 3 * j).copy_from(b);
    }

    /// `self` after `earlier`: the transition over both intervals.
    pub fn after(&self, earlier: &TransitionBlocks) -> TransitionBlocks {
        TransitionBlocks { phi: self.phi * earlier.phi, convention: self.convention, dt: self.dt + earlier.dt }
    }
}

/// `Ψ₁ = ∫₀^Δt (Γ₀(ωs)f)×Γ₁(ωs)s ds` and `Ψ₂ = ∫₀^Δt Ψ₁(s) ds`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsiIntegrals {
    pub psi1: Mat3,
    pub psi2: Mat3,
    pub error_estimate: f64,
}

fn psi_integrand(omega: &Vec3, f: &Vec3, s: f64) -> Mat3 {
    let ws = omega * s;
    skew(&(gamma(0, &ws) * f)) * gamma(1, &ws) * s
}

fn require_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive and finite, got {dt}")));
    }
    Ok(())
}

/// Adaptive Gauss–Legendre evaluation of Ψ₁ and Ψ₂ (the latter via
/// `∫₀^Δt (Δt − s)·integrand ds`).
pub fn psi_integrals(omega: &Vec3, f: &Vec3, dt: f64) -> Result<PsiIntegrals> {
    require_dt(dt)?;
    check_finite(omega, "omega")?;
    check_finite(f, "f")?;
    let tol = 1e-12 * f64::max(1.0, f.norm() * dt * dt);
    let (psi1, e1) = integrate_adaptive(|s| psi_integrand(omega, f, s), 0.0, dt, tol)?;
    let (psi2, e2) = integrate_adaptive(|s| psi_integrand(omega, f, s) * (dt - s), 0.0, dt, tol)?;
    Ok(PsiIntegrals { psi1, psi2, error_estimate: e1 + e2 })
}

/// Left-invariant Φ; depends only on the bias-corrected IMU rates.
pub fn phi_left(imu: &ImuSample, dt: f64) -> Result<TransitionBlocks> {
    require_dt(dt)?;
    let (w, f) = (imu.gyro, imu.accel);
    let wt = w * dt;
    let g0t = gamma(0, &wt).transpose();
    let g1 = gamma(1, &wt);
    let g2 = gamma(2, &wt);
    let psi = psi_integrals(&w, &f, dt)?;
    let mut p = TransitionBlocks { phi: Mat15::identity(), convention: Convention::LeftInvariant, dt };
    for k in 0..3 {
        p.set(k, k, &g0t);
    }
    let b14 = -g0t * g1 * dt;
    p.set(0, 3, &b14);
    p.set(1, 0, &(-g0t * skew(&(g1 * f)) * dt));
    p.set(1, 3, &(g0t * psi.psi1));
    p.set(1, 4, &b14);
    p.set(2, 0, &(-g0t * skew(&(g2 * f)) * (dt * dt)));
    p.set(2, 1, &(g0t * dt));
    p.set(2, 3, &(g0t * psi.psi2));
    p.set(2, 4, &(-g0t * g2 * (dt * dt)));
    Ok(p)
}

/// Right-invariant Φ from the estimate at the start of the interval.
///
/// The gravity coupling uses the exact integrals `Γ₁(ω_ieΔt)G`, `Γ₂(ω_ieΔt)G`
/// in the (2,1) and (3,1) blocks, and `G^i = Γ₀(ω_ieΔt)G` inside the bias
/// columns.
pub fn phi_right(xhat: &GroupElement, imu: &ImuSample, earth: &EarthModel, dt: f64) -> Result<TransitionBlocks> {
    require_dt(dt)?;
    if xhat.frame != FrameTag::EcefIb {
        return Err(Error::FrameMismatch { expected: FrameTag::EcefIb, actual: xhat.frame });
    }
    let wie = earth.omega_ie_e() * dt;
    let c = gamma(0, &wie).transpose();
    let g = earth.gravitation(&xhat.pos);
    let gi = skew(&(gamma(0, &wie) * g));
    let ck = *xhat.rot.mat();
    let vb = skew(&(ck.transpose() * xhat.vel));
    let pb = skew(&(ck.transpose() * xhat.pos));
    let wt = imu.gyro * dt;
    let (g1, g2, g3) = (gamma(1, &wt) * dt, gamma(2, &wt) * (dt * dt), gamma(3, &wt) * dt.powi(3));
    let cc = c * ck;

    let mut p = TransitionBlocks { phi: Mat15::identity(), convention: Convention::RightInvariant, dt };
    for k in 0..3 {
        p.set(k, k, &c);
    }
    p.set(0, 3, &(-cc * g1));
    p.set(1, 0, &(-c * skew(&(gamma(1, &wie) * g)) * dt));
    p.set(1, 3, &(c * gi * ck * g2 + cc * g1 * vb));
    p.set(1, 4, &(cc * g1));
    p.set(2, 0, &(-c * skew(&(gamma(2, &wie) * g)) * (dt * dt)));
    p.set(2, 1, &(c * dt));
    p.set(2, 3, &(c * gi * ck * g3 + cc * g2 * vb + cc * g1 * pb));
    p.set(2, 4, &(cc * g2));
    Ok(p)
}

/// Convention-dispatching Φ.
pub fn phi(conv: Convention, xhat: &GroupElement, imu: &ImuSample, earth: &EarthModel, dt: f64) -> Result<TransitionBlocks> {
    match conv {
        Convention::LeftInvariant => phi_left(imu, dt),
        Convention::RightInvariant => phi_right(xhat, imu, earth, dt),
    }
}

/// Trapezoidal `Q_d = ½(Φ G Q_c Gᵀ Φᵀ + G Q_c Gᵀ)Δt`, symmetrised.
pub fn qd_matrix(phi: &TransitionBlocks, g: &Mat15x12, noise: &NoiseParams, dt: f64) -> Mat15 {
    let gq = g * noise.qc() * g.transpose();
    let q = (phi.phi * gq * phi.phi.transpose() + gq) * (0.5 * dt);
    (q + q.transpose()) * 0.5
}

/// Frozen-F reference: `exp(F Δt)` by RK4 with `steps` substeps.
pub fn phi_frozen_rk4(conv: Convention, xhat: &GroupElement, imu: &ImuSample, earth: &EarthModel, dt: f64, steps: usize) -> Result<Mat15> {
    let f = f_matrix(conv, xhat, imu, earth)?;
    Ok(crate::numeric::rk4(|_, p: &Mat15| f * p, 0.0, Mat15::identity(), dt, steps))
}

/// Residuals of the Γ-integral identities against composite Simpson quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaIntegralReport {
    /// max-abs of `∫₀^Δt Γ₀(ωs) ds − Γ₁(ωΔt)Δt`
    pub single: f64,
    /// max-abs of the double integral minus `Γ₂(ωΔt)Δt²`
    pub double: f64,
    /// max-abs of the triple integral minus `Γ₃(ωΔt)Δt³`
    pub triple: f64,
}

impl GammaIntegralReport {
    pub fn max_residual(&self) -> f64 {
        self.single.max(self.double).max(self.triple)
    }
}

/// Checks the iterated Γ₀ integrals. The nested integrals are reduced by the
/// Cauchy formula to single integrals with weights `(Δt − s)` and `(Δt − s)²/2`.
pub fn gamma_integrals_check(omega: &Vec3, dt: f64) -> Result<GammaIntegralReport> {
    require_dt(dt)?;
    check_finite(omega, "omega")?;
    const POINTS: usize = 100_000;
    let g0 = |s: f64| gamma(0, &(omega * s));
    let single = simpson(g0, 0.0, dt, POINTS);
    let double = simpson(|s| g0(s) * (dt - s), 0.0, dt, POINTS);
    let triple = simpson(|s| g0(s) * (0.5 * (dt - s) * (dt - s)), 0.0, dt, POINTS);
    let wt = omega * dt;
    let maxabs = |m: Mat3| m.abs().max();
    Ok(GammaIntegralReport {
        single: maxabs(single - gamma(1, &wt) * dt),
        double: maxabs(double - gamma(2, &wt) * (dt * dt)),
        triple: maxabs(triple - gamma(3, &wt) * dt.powi(3)),
    })
}
