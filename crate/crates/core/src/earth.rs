//! Earth rotation, gravitation and WGS-84 geodetic utilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liegroup::{Mat3, Rotation, Vec3};

/// Earth constants treated as filter inputs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EarthModel {
    /// Earth rotation rate, rad/s.
    pub omega_ie: f64,
    /// Gravitational parameter, m³/s².
    pub mu: f64,
    /// Ellipsoid semi-major axis, m.
    pub semi_major: f64,
    /// First eccentricity squared.
    pub ecc2: f64,
}

impl Default for EarthModel {
    fn default() -> Self {
        EarthModel { omega_ie: 7.292115e-5, mu: 3.986004418e14, semi_major: 6_378_137.0, ecc2: 6.694_379_990_14e-3 }
    }
}

impl EarthModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_ie > 0.0 && self.omega_ie.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega_ie must be positive, got {}", self.omega_ie)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.semi_major > 0.0) || !(0.0..1.0).contains(&self.ecc2) {
            return Err(Error::InvalidParameter("ellipsoid parameters out of range".into()));
        }
        Ok(())
    }

    /// `ω_ie^e`.
    pub fn omega_ie_e(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.omega_ie)
    }

    /// `ω_ie^n` at geodetic latitude `lat`.
    pub fn omega_ie_n(&self, lat: f64) -> Vec3 {
        Vec3::new(self.omega_ie * lat.cos(), 0.0, -self.omega_ie * lat.sin())
    }

    /// Point-mass gravitation `G = −μ r / ‖r‖³`.
    pub fn gravitation(&self, r: &Vec3) -> Vec3 {
        let n = r.norm();
        -r * (self.mu / (n * n * n))
    }

    /// Plumb-bob gravity `g = G − (ω_ie×)² r`.
    pub fn gravity(&self, r: &Vec3) -> Vec3 {
        let w = self.omega_ie_e();
        self.gravitation(r) - w.cross(&w.cross(r))
    }

    /// Meridian and prime-vertical radii of curvature `(R_M, R_N)`.
    pub fn radii(&self, lat: f64) -> (f64, f64) {
        let s2 = lat.sin().powi(2);
        let d = 1.0 - self.ecc2 * s2;
        let rn = self.semi_major / d.sqrt();
        let rm = self.semi_major * (1.0 - self.ecc2) / (d * d.sqrt());
        (rm, rn)
    }

    /// Transport rate `ω_en^n` for NED velocity `v_n` at latitude `lat`, height `h`.
    pub fn transport_rate(&self, lat: f64, h: f64, v_n: &Vec3) -> Vec3 {
        let (rm, rn) = self.radii(lat);
        Vec3::new(v_n.y / (rn + h), -v_n.x / (rm + h), -v_n.y * lat.tan() / (rn + h))
    }

    pub fn geodetic_to_ecef(&self, geo: &Geodetic) -> Vec3 {
        let (_, rn) = self.radii(geo.lat);
        let (sl, cl) = geo.lat.sin_cos();
        let (so, co) = geo.lon.sin_cos();
        Vec3::new((rn + geo.height) * cl * co, (rn + geo.height) * cl * so, (rn * (1.0 - self.ecc2) + geo.height) * sl)
    }

    /// Iterative inverse of [`EarthModel::geodetic_to_ecef`]; converges to
    /// sub-millimetre height within a few iterations for terrestrial points.
    pub fn ecef_to_geodetic(&self, r: &Vec3) -> Geodetic {
        let p = (r.x * r.x + r.y * r.y).sqrt();
        let lon = r.y.atan2(r.x);
        let mut lat = r.z.atan2(p * (1.0 - self.ecc2));
        let mut h = 0.0;
        for _ in 0..10 {
            let (_, rn) = self.radii(lat);
            let cl = lat.cos();
            h = if cl.abs() > 1e-8 { p / cl - rn } else { r.z.abs() - rn * (1.0 - self.ecc2) };
            lat = r.z.atan2(p * (1.0 - self.ecc2 * rn / (rn + h)));
        }
        Geodetic { lat, lon, height: h }
    }
}

/// Geodetic coordinates: latitude and longitude in radians, height in metres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geodetic {
    pub lat: f64,
    pub lon: f64,
    pub height: f64,
}

/// `C_n^e`, the NED-to-ECEF rotation at the given latitude and longitude.
pub fn c_n_e(lat: f64, lon: f64) -> Rotation {
    let (sl, cl) = lat.sin_cos();
    let (so, co) = lon.sin_cos();
    Rotation::from_matrix_unchecked(Mat3::new(
        -sl * co,
        -so,
        -cl * co, //
        -sl * so,
        co,
        -cl * so, //
        cl,
        0.0,
        -sl,
    ))
}
