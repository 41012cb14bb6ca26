//! Bistatic geometry: antenna placement, bistatic angle, spin-axis
//! elevation, path delay and Doppler shift of point scatterers.
//!
//! All angles are radians, positions meters, velocities m/s, frequencies Hz.

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub type Vec3 = Vector3<f64>;

/// Distances below this are treated as coincident points.
const COINCIDENT_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("carrier frequency must be positive and finite, got {0}")]
    InvalidCarrier(f64),
    #[error("{0} coincides with the evaluation point")]
    Coincident(&'static str),
    #[error("spin axis has zero length")]
    ZeroAxis,
    #[error("bisector is undefined for exact forward scatter")]
    ForwardScatter,
    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),
}

/// Transmitter, receiver and target reference point, plus the carrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BistaticGeometry {
    tx: Vec3,
    rx: Vec3,
    target_ref: Vec3,
    carrier_freq: f64,
}

impl BistaticGeometry {
    pub fn new(tx: Vec3, rx: Vec3, target_ref: Vec3, carrier_freq: f64) -> Result<Self, GeometryError> {
        if !(carrier_freq.is_finite() && carrier_freq > 0.0) {
            return Err(GeometryError::InvalidCarrier(carrier_freq));
        }
        for (name, v) in [("tx", &tx), ("rx", &rx), ("target_ref", &target_ref)] {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(GeometryError::NonFinite(name));
            }
        }
        Ok(Self { tx, rx, target_ref, carrier_freq })
    }

    /// Places tx and rx at `range` from `target_ref` in the horizontal plane,
    /// symmetric about the bisector azimuth `bisector_az` (measured from +x
    /// toward +y), separated by the bistatic angle `beta`.
    pub fn from_angles(
        range: f64,
        beta: f64,
        bisector_az: f64,
        target_ref: Vec3,
        carrier_freq: f64,
    ) -> Result<Self, GeometryError> {
        let dir = |az: f64| Vec3::new(az.cos(), az.sin(), 0.0);
        let tx = target_ref + range * dir(bisector_az + beta / 2.0);
        let rx = target_ref + range * dir(bisector_az - beta / 2.0);
        Self::new(tx, rx, target_ref, carrier_freq)
    }

    pub fn tx(&self) -> Vec3 {
        self.tx
    }

    pub fn rx(&self) -> Vec3 {
        self.rx
    }

    pub fn target_ref(&self) -> Vec3 {
        self.target_ref
    }

    pub fn carrier_freq(&self) -> f64 {
        self.carrier_freq
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    /// Direct tx to rx distance.
    pub fn baseline(&self) -> f64 {
        (self.rx - self.tx).norm()
    }

    /// Unit vectors from `point` toward tx and rx.
    fn look_vectors(&self, point: &Vec3) -> Result<(Vec3, Vec3), GeometryError> {
        let to_tx = self.tx - point;
        let to_rx = self.rx - point;
        let dt = to_tx.norm();
        let dr = to_rx.norm();
        if dt < COINCIDENT_EPS {
            return Err(GeometryError::Coincident("tx"));
        }
        if dr < COINCIDENT_EPS {
            return Err(GeometryError::Coincident("rx"));
        }
        Ok((to_tx / dt, to_rx / dr))
    }

    /// Unit bistatic bisector at `point` (sum of the two look vectors).
    pub fn bisector(&self, point: &Vec3) -> Result<Vec3, GeometryError> {
        let (ut, ur) = self.look_vectors(point)?;
        let b = ut + ur;
        let n = b.norm();
        if n < 1e-12 {
            return Err(GeometryError::ForwardScatter);
        }
        Ok(b / n)
    }
}

/// Instantaneous position, velocity and complex reflectivity of a point scatterer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScattererState {
    pub pos: Vec3,
    pub vel: Vec3,
    pub reflectivity: Complex64,
}

/// Angle at `point` between the directions to tx and rx, in [0, pi].
pub fn bistatic_angle(geom: &BistaticGeometry, point: &Vec3) -> Result<f64, GeometryError> {
    let (ut, ur) = geom.look_vectors(point)?;
    Ok(ut.dot(&ur).clamp(-1.0, 1.0).acos())
}

/// Angle between the bistatic bisector at `point` and the spin axis, folded
/// into [0, pi/2]. It is pi/2 when the bisector lies in the rotation plane.
pub fn elevation_angle(spin_axis: &Vec3, geom: &BistaticGeometry, point: &Vec3) -> Result<f64, GeometryError> {
    let n = spin_axis.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(GeometryError::ZeroAxis);
    }
    let b = geom.bisector(point)?;
    Ok((b.dot(spin_axis) / n).abs().clamp(0.0, 1.0).acos())
}

/// Bistatic propagation delay tx -> point -> rx.
pub fn bistatic_delay(geom: &BistaticGeometry, point: &Vec3) -> f64 {
    ((point - geom.tx).norm() + (point - geom.rx).norm()) / SPEED_OF_LIGHT
}

/// Doppler shift of a moving scatterer, -(1/lambda) d/dt (R_tx + R_rx).
/// A scatterer sitting exactly on an antenna contributes no rate from that leg.
pub fn bistatic_doppler(geom: &BistaticGeometry, state: &ScattererState) -> f64 {
    let rate = |antenna: &Vec3| {
        let d = state.pos - antenna;
        let n = d.norm();
        if n < COINCIDENT_EPS {
            0.0
        } else {
            d.dot(&state.vel) / n
        }
    };
    -(rate(&geom.tx) + rate(&geom.rx)) / geom.wavelength()
}
