//! The four strapdown models written as `Ẋ = X W₁ + W₂ X` on SE₂(3), their
//! exact flows, the lift `Λ`, the input action `ψ`, frame translations and
//! randomized verifiers for group-affinity and equivariance.

use rand::Rng;

use crate::earth::{c_n_e, EarthModel, Geodetic};
use crate::error::{Error, Result};
use crate::liegroup::{check_finite, gamma, se23_exp, skew, so3_exp, FrameTag, GroupElement, Mat5, Rotation, Tangent9, Vec3};

/// One IMU record. The sample stamped `t` carries the mean rates over the
/// interval that ends at `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    /// `ω̃_ib^b`, rad/s.
    pub gyro: Vec3,
    /// `f̃_ib^b`, m/s².
    pub accel: Vec3,
}

impl ImuSample {
    pub fn new(t: f64, gyro: Vec3, accel: Vec3) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::NonFinite("imu time"));
        }
        check_finite(&gyro, "gyro")?;
        check_finite(&accel, "accel")?;
        Ok(ImuSample { t, gyro, accel })
    }
}

/// Everything the right-hand side needs besides the state itself, resolved
/// in the state's frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NavInputs {
    pub gyro: Vec3,
    pub accel: Vec3,
    /// `ω_ie` in the navigation frame.
    pub omega_ie: Vec3,
    /// Transport rate `ω_en^n`; zero for ECEF variants.
    pub omega_en: Vec3,
    /// `G_ib` for inertial-velocity variants, `g_ib` (plumb-bob) otherwise.
    pub gravity: Vec3,
}

impl NavInputs {
    /// Inputs for an ECEF variant, gravity evaluated at `x.pos`.
    pub fn ecef(x: &GroupElement, gyro: Vec3, accel: Vec3, earth: &EarthModel) -> Result<Self> {
        if x.frame.is_ned() {
            return Err(Error::FrameMismatch { expected: FrameTag::EcefIb, actual: x.frame });
        }
        let gravity = if x.frame.is_inertial_velocity() { earth.gravitation(&x.pos) } else { earth.gravity(&x.pos) };
        Ok(NavInputs { gyro, accel, omega_ie: earth.omega_ie_e(), omega_en: Vec3::zeros(), gravity })
    }

    /// Inputs for a NED variant whose navigation frame sits at `site`.
    ///
    /// `x.pos` is `r_eb^n`, the geocentric position resolved in that frame.
    pub fn ned(x: &GroupElement, gyro: Vec3, accel: Vec3, earth: &EarthModel, site: &Geodetic) -> Result<Self> {
        if !x.frame.is_ned() {
            return Err(Error::FrameMismatch { expected: FrameTag::NedIb, actual: x.frame });
        }
        let c = c_n_e(site.lat, site.lon);
        let omega_ie = earth.omega_ie_n(site.lat);
        let v_eb = if x.frame.is_inertial_velocity() { x.vel - omega_ie.cross(&x.pos) } else { x.vel };
        let omega_en = earth.transport_rate(site.lat, site.height, &v_eb);
        let r_e = c.mat() * x.pos;
        let g_e = if x.frame.is_inertial_velocity() { earth.gravitation(&r_e) } else { earth.gravity(&r_e) };
        Ok(NavInputs { gyro, accel, omega_ie, omega_en, gravity: c.mat().transpose() * g_e })
    }

    pub fn omega_in(&self) -> Vec3 {
        self.omega_ie + self.omega_en
    }
}

/// The `(W₁, W₂)` pair of `Ẋ = X W₁ + W₂ X`.
///
/// `w2` carries the state-dependent velocity/position columns evaluated at the
/// state it was built for.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DynamicsPair {
    pub w1: Mat5,
    pub w2: Mat5,
    pub frame: FrameTag,
}

fn algebra(top_left: &Vec3, col4: &Vec3, col5: &Vec3) -> Mat5 {
    Tangent9::new(*top_left, *col4, *col5).hat()
}

/// Assembles `(W₁, W₂)` for `frame` at state `x`.
pub fn dynamics_from_inputs(frame: FrameTag, x: &GroupElement, u: &NavInputs) -> Result<DynamicsPair> {
    if x.frame != frame {
        return Err(Error::FrameMismatch { expected: frame, actual: x.frame });
    }
    let w1 = algebra(&u.gyro, &u.accel, &Vec3::zeros());
    let w_in = u.omega_in();
    let w2 = if frame.is_inertial_velocity() {
        algebra(&-w_in, &u.gravity, &x.vel)
    } else {
        algebra(&-w_in, &(u.gravity - u.omega_ie.cross(&x.vel)), &(x.vel + u.omega_ie.cross(&x.pos)))
    };
    Ok(DynamicsPair { w1, w2, frame })
}

/// `(W₁, W₂)` for an ECEF variant from one IMU record.
///
/// NED variants need the navigation-frame site; build their inputs with
/// [`NavInputs::ned`] and call [`dynamics_from_inputs`].
pub fn build_dynamics(frame: FrameTag, x: &GroupElement, imu: &ImuSample, earth: &EarthModel) -> Result<DynamicsPair> {
    if x.frame != frame {
        return Err(Error::FrameMismatch { expected: frame, actual: x.frame });
    }
    if frame.is_ned() {
        return Err(Error::InvalidParameter(format!("{} dynamics need a navigation-frame site; use NavInputs::ned", frame.name())));
    }
    let u = NavInputs::ecef(x, imu.gyro, imu.accel, earth)?;
    dynamics_from_inputs(frame, x, &u)
}

/// `f(X) = X W₁ + W₂ X` as a 5×5 matrix.
pub fn vector_field(x: &GroupElement, pair: &DynamicsPair) -> Mat5 {
    let m = x.to_matrix();
    m * pair.w1 + pair.w2 * m
}

/// `f(X)` of the full nonlinear model, with `W₂` regenerated from the state
/// matrix `m` (which need not lie exactly on the group, as in RK4 stages).
pub fn model_field(frame: FrameTag, m: &Mat5, u: &NavInputs) -> Mat5 {
    let c = m.fixed_view::<3, 3>(0, 0).into_owned();
    let v = m.fixed_view::<3, 1>(0, 3).into_owned();
    let p = m.fixed_view::<3, 1>(0, 4).into_owned();
    let w_in = u.omega_in();
    let (dv, dp) = if frame.is_inertial_velocity() {
        (-w_in.cross(&v) + c * u.accel + u.gravity, -w_in.cross(&p) + v)
    } else {
        let w_ie = u.omega_ie;
        (-(w_ie * 2.0 + u.omega_en).cross(&v) + c * u.accel + u.gravity, -u.omega_en.cross(&p) + v)
    };
    let mut out = Mat5::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&(c * skew(&u.gyro) - skew(&w_in) * c));
    out.fixed_view_mut::<3, 1>(0, 3).copy_from(&dv);
    out.fixed_view_mut::<3, 1>(0, 4).copy_from(&dp);
    out
}

/// Exact solution `exp(W₂ dt) · X · exp(W₁ dt)` for a constant pair.
///
/// Both matrices must be 𝔰𝔢₂(3) elements (zero bottom rows).
pub fn flow(x: &GroupElement, pair: &DynamicsPair, dt: f64) -> GroupElement {
    let left = se23_exp(&Tangent9::vee(&pair.w2).scale(dt), x.frame);
    let right = se23_exp(&Tangent9::vee(&pair.w1).scale(dt), x.frame);
    left.compose(x).compose(&right)
}

/// `exp(M t)` for `M = [[S, a, b], [0, 0, c], [0, 0, 0]]` with `S = φ×`.
fn exp_affine(phi: &Vec3, a: &Vec3, b: &Vec3, c: f64, t: f64) -> Mat5 {
    let wt = phi * t;
    let g1 = gamma(1, &wt);
    let mut out = Mat5::identity();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(so3_exp(&wt).mat());
    out.fixed_view_mut::<3, 1>(0, 3).copy_from(&(g1 * a * t));
    out.fixed_view_mut::<3, 1>(0, 4).copy_from(&(g1 * b * t + gamma(2, &wt) * a * (c * t * t)));
    out[(3, 4)] = c * t;
    out
}

/// `exp(M t) − I` for the same `M`, without cancellation in the rotation block.
fn exp_affine_delta(phi: &Vec3, a: &Vec3, b: &Vec3, c: f64, t: f64) -> Mat5 {
    let wt = phi * t;
    let mut out = exp_affine(phi, a, b, c, t) - Mat5::identity();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&(gamma(1, &wt) * skew(&wt)));
    out
}

/// Exact step of the inertial-velocity models for inputs held constant over `dt`.
///
/// The state-dependent `v` column of `W₂` is moved into the constant shift
/// `D = e₄e₅ᵀ`, using `X D − D X = [0 0 v]`, so that
/// `Ẋ = X (W₁ + D) + (W₂ᶜ − D) X` has constant coefficients and the product of
/// the two exponentials is exact.
pub fn mechanize(x: &GroupElement, u: &NavInputs, dt: f64) -> Result<GroupElement> {
    if !x.frame.is_inertial_velocity() {
        return Err(Error::NotGroupAffine(x.frame));
    }
    let zero = Vec3::zeros();
    let right = exp_affine(&u.gyro, &u.accel, &zero, 1.0, dt);
    let left = exp_affine(&-u.omega_in(), &u.gravity, &zero, -1.0, dt);
    let m = left * x.to_matrix() * right;
    Ok(GroupElement {
        rot: Rotation::from_matrix_unchecked(m.fixed_view::<3, 3>(0, 0).into_owned()),
        vel: m.fixed_view::<3, 1>(0, 3).into_owned(),
        pos: m.fixed_view::<3, 1>(0, 4).into_owned(),
        frame: x.frame,
    })
}

/// A mechanization step as the new attitude plus velocity and position
/// increments, each computed without subtracting large positions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Increment {
    pub rot: Rotation,
    pub dvel: Vec3,
    pub dpos: Vec3,
}

/// [`mechanize`] in increment form: `X' − X = (L − I) X R + X (R − I)`.
pub fn mechanize_increment(x: &GroupElement, u: &NavInputs, dt: f64) -> Result<Increment> {
    if !x.frame.is_inertial_velocity() {
        return Err(Error::NotGroupAffine(x.frame));
    }
    let zero = Vec3::zeros();
    let rd = exp_affine_delta(&u.gyro, &u.accel, &zero, 1.0, dt);
    let ld = exp_affine_delta(&-u.omega_in(), &u.gravity, &zero, -1.0, dt);
    let m = x.to_matrix();
    let d = ld * (m + m * rd) + m * rd;
    Ok(Increment {
        rot: Rotation::from_matrix_unchecked(x.rot.mat() + d.fixed_view::<3, 3>(0, 0)),
        dvel: d.fixed_view::<3, 1>(0, 3).into_owned(),
        dpos: d.fixed_view::<3, 1>(0, 4).into_owned(),
    })
}

/// [`mechanize_ecef`] in increment form.
pub fn mechanize_ecef_increment(x: &GroupElement, gyro: Vec3, accel: Vec3, earth: &EarthModel, dt: f64) -> Result<Increment> {
    let mut u = NavInputs::ecef(x, gyro, accel, earth)?;
    let first = mechanize_increment(x, &u, dt)?;
    u.gravity = earth.gravitation(&(x.pos + 0.5 * first.dpos));
    mechanize_increment(x, &u, dt)
}

/// One ECEF_IB step for IMU rates held over `dt`, with the gravitation
/// re-evaluated at the predicted midpoint position (two passes).
pub fn mechanize_ecef(x: &GroupElement, gyro: Vec3, accel: Vec3, earth: &EarthModel, dt: f64) -> Result<GroupElement> {
    let mut u = NavInputs::ecef(x, gyro, accel, earth)?;
    let first = mechanize(x, &u, dt)?;
    u.gravity = earth.gravitation(&(0.5 * (x.pos + first.pos)));
    mechanize(x, &u, dt)
}

/// Lift `Λ(X, (W₁, W₂)) = X W₁ X⁻¹ + W₂`.
pub fn lift(x: &GroupElement, pair: &DynamicsPair) -> Mat5 {
    let m = x.to_matrix();
    m * pair.w1 * x.inverse().to_matrix() + pair.w2
}

/// Input action `ψ_A(W₁, W₂) = (W₁, A W₂ A⁻¹)`.
pub fn velocity_action(a: &GroupElement, pair: &DynamicsPair) -> DynamicsPair {
    DynamicsPair { w1: pair.w1, w2: a.to_matrix() * pair.w2 * a.inverse().to_matrix(), frame: pair.frame }
}

/// The left translations relating the four state conventions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FrameTranslation {
    /// NED → ECEF by `C_n^e` (rotation only; keeps the velocity convention).
    A1 { c_n_e: Rotation },
    /// NED_EB → NED_IB: `v += ω_ie^n × r_eb^n`.
    A2 { lat: f64 },
    /// ECEF_EB → ECEF_IB: `v += ω_ie^e × r_eb^e`.
    A3,
}

impl FrameTranslation {
    fn target(&self, from: FrameTag) -> Result<FrameTag> {
        let to = match (self, from) {
            (FrameTranslation::A1 { .. }, FrameTag::NedEb) => FrameTag::EcefEb,
            (FrameTranslation::A1 { .. }, FrameTag::NedIb) => FrameTag::EcefIb,
            (FrameTranslation::A2 { .. }, FrameTag::NedEb) => FrameTag::NedIb,
            (FrameTranslation::A3, FrameTag::EcefEb) => FrameTag::EcefIb,
            (FrameTranslation::A1 { .. }, f) => return Err(Error::FrameMismatch { expected: FrameTag::NedEb, actual: f }),
            (FrameTranslation::A2 { .. }, f) => return Err(Error::FrameMismatch { expected: FrameTag::NedEb, actual: f }),
            (FrameTranslation::A3, f) => return Err(Error::FrameMismatch { expected: FrameTag::EcefEb, actual: f }),
        };
        Ok(to)
    }

    /// The group element `A` for state `x` (A₂/A₃ depend on its position).
    pub fn element(&self, x: &GroupElement, earth: &EarthModel) -> GroupElement {
        let mut a = GroupElement::identity(x.frame);
        match self {
            FrameTranslation::A1 { c_n_e } => a.rot = *c_n_e,
            FrameTranslation::A2 { lat } => a.vel = earth.omega_ie_n(*lat).cross(&x.pos),
            FrameTranslation::A3 => a.vel = earth.omega_ie_e().cross(&x.pos),
        }
        a
    }
}

/// `A · X`, retagged to the target convention.
pub fn frame_translation(which: FrameTranslation, x: &GroupElement, earth: &EarthModel) -> Result<GroupElement> {
    let to = which.target(x.frame)?;
    Ok(which.element(x, earth).compose(x).with_frame(to))
}

/// Inverse of [`frame_translation`]: maps a target-convention state back.
pub fn frame_translation_inverse(which: FrameTranslation, y: &GroupElement, from: FrameTag, earth: &EarthModel) -> Result<GroupElement> {
    let to = which.target(from)?;
    if y.frame != to {
        return Err(Error::FrameMismatch { expected: to, actual: y.frame });
    }
    // A₂/A₃ only touch velocity, so the position of `y` equals that of the source.
    let a = which.element(&y.with_frame(from), earth);
    Ok(a.inverse().compose(&y.with_frame(from)))
}

/// Random element with rotation angle below 3 rad and uniform translation components.
pub fn random_element<R: Rng>(rng: &mut R, vel_scale: f64, pos_scale: f64, frame: FrameTag) -> GroupElement {
    let mut unit = || Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let mut phi = unit() * 3.0;
    if phi.norm() > 3.0 {
        phi *= 3.0 / phi.norm();
    }
    GroupElement { rot: so3_exp(&phi), vel: unit() * vel_scale, pos: unit() * pos_scale, frame }
}

/// Residual of the group-affine identity
/// `f(X_A X_B) = f(X_A) X_B + X_A f(X_B) − X_A f(I) X_B` for a map
/// `X ↦ (W₁, W₂)`.
///
/// The builder sees every evaluation point, so state-dependent columns of `W₂`
/// are regenerated at `X_A`, `X_B`, `X_A X_B` and `I`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct AffineResidual {
    /// Frobenius norm of the defect.
    pub absolute: f64,
    /// Defect divided by the largest of the four terms (at least 1), which
    /// separates rounding at earth-scale magnitudes from structural failure.
    pub relative: f64,
}

pub fn group_affine_residual<B>(builder: &B, xa: &GroupElement, xb: &GroupElement) -> AffineResidual
where
    B: Fn(&GroupElement) -> DynamicsPair,
{
    let f = |x: &GroupElement| vector_field(x, &builder(x));
    let id = GroupElement::identity(xa.frame);
    let (ma, mb) = (xa.to_matrix(), xb.to_matrix());
    let lhs = f(&xa.compose(xb));
    let terms = [f(xa) * mb, ma * f(xb), ma * f(&id) * mb];
    let absolute = (lhs - (terms[0] + terms[1] - terms[2])).norm();
    let scale = terms.iter().map(|t| t.norm()).fold(lhs.norm().max(1.0), f64::max);
    AffineResidual { absolute, relative: absolute / scale }
}

/// Worst-case [`AffineResidual`] components over `samples` random pairs.
pub fn check_group_affine<B, R>(builder: &B, samples: usize, rng: &mut R, vel_scale: f64, pos_scale: f64, frame: FrameTag) -> (AffineResidual, usize)
where
    B: Fn(&GroupElement) -> DynamicsPair,
    R: Rng,
{
    let mut worst = AffineResidual { absolute: 0.0, relative: 0.0 };
    for _ in 0..samples {
        let xa = random_element(rng, vel_scale, pos_scale, frame);
        let xb = random_element(rng, vel_scale, pos_scale, frame);
        let r = group_affine_residual(builder, &xa, &xb);
        worst.absolute = worst.absolute.max(r.absolute);
        worst.relative = worst.relative.max(r.relative);
    }
    (worst, samples)
}

/// `‖Ad_{A⁻¹} Λ(AX, ψ_A(v)) − Λ(X, v)‖_F`.
pub fn equivariance_residual(a: &GroupElement, x: &GroupElement, pair: &DynamicsPair) -> f64 {
    let moved = lift(&a.compose(x), &velocity_action(a, pair));
    let back = a.inverse().to_matrix() * moved * a.to_matrix();
    (back - lift(x, pair)).norm()
}

/// `d⋆L(A, F)(X) = A · F(A⁻¹ X)` for `F(X) = X W₁ + W₂ X`.
pub fn dstar(a: &GroupElement, field: &dyn Fn(&GroupElement) -> Mat5, x: &GroupElement) -> Mat5 {
    a.to_matrix() * field(&a.inverse().compose(x))
}

/// Residuals of the `d⋆L` action laws at the probe points:
/// composition `d⋆L(A, d⋆L(B, F)) = d⋆L(AB, F)`, identity, and linearity with
/// `α₁ = 2`, `α₂ = −1`.
#[derive(Clone, Debug, PartialEq)]
pub struct DstarReport {
    pub composition: f64,
    pub identity: f64,
    pub linearity: f64,
}

pub fn check_dstar_action(a: &GroupElement, b: &GroupElement, fields: (&DynamicsPair, &DynamicsPair), probes: &[GroupElement]) -> DstarReport {
    let (p1, p2) = fields;
    let f1 = |x: &GroupElement| vector_field(x, p1);
    let f2 = |x: &GroupElement| vector_field(x, p2);
    let (a1, a2) = (2.0, -1.0);
    let combo = |x: &GroupElement| f1(x) * a1 + f2(x) * a2;
    let inner = |x: &GroupElement| dstar(b, &f1, x);
    let id = GroupElement::identity(a.frame);
    let ab = a.compose(b);
    let mut rep = DstarReport { composition: 0.0, identity: 0.0, linearity: 0.0 };
    for x in probes {
        rep.composition = rep.composition.max((dstar(a, &inner, x) - dstar(&ab, &f1, x)).norm());
        rep.identity = rep.identity.max((dstar(&id, &f1, x) - f1(x)).norm());
        let lin = dstar(a, &combo, x) - (dstar(a, &f1, x) * a1 + dstar(a, &f2, x) * a2);
        rep.linearity = rep.linearity.max(lin.norm());
    }
    rep
}
