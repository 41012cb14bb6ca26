//! VTOL airframe model: rotating propellers as discrete blade scatterers,
//! static fuselage returns, body pose, and per-flight-mode activation.
//!
//! Propeller and body-scatterer coordinates are in the body frame
//! (x forward, y left, z up). `scatterer_states` returns world-frame states.

use std::f64::consts::TAU;

use nalgebra::{Rotation3, Unit};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ScattererState, Vec3};

/// Tolerance on unit-norm and orthogonality checks.
const AXIS_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AirframeError {
    #[error("propeller {index}: {constraint}")]
    InvalidPropeller { index: usize, constraint: &'static str },
    #[error("lifting propeller {0} spin axis is not parallel to the first lifting axis")]
    LiftingAxesNotParallel(usize),
    #[error("thrust propeller {0} spin axis is not orthogonal to the lifting axes")]
    ThrustAxisNotOrthogonal(usize),
    #[error("non-finite body pose")]
    InvalidPose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlightMode {
    /// Take-off, landing and hover: lifting propellers only.
    VerticalFlight,
    /// Lifting and thrust propellers together.
    Transition,
    /// Thrust propeller only.
    Cruise,
}

impl FlightMode {
    pub const ALL: [FlightMode; 3] = [FlightMode::VerticalFlight, FlightMode::Transition, FlightMode::Cruise];

    pub fn lifting_active(self) -> bool {
        matches!(self, FlightMode::VerticalFlight | FlightMode::Transition)
    }

    pub fn thrust_active(self) -> bool {
        matches!(self, FlightMode::Transition | FlightMode::Cruise)
    }
}

impl std::fmt::Display for FlightMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FlightMode::VerticalFlight => "VerticalFlight",
            FlightMode::Transition => "Transition",
            FlightMode::Cruise => "Cruise",
        };
        f.write_str(s)
    }
}

/// A rotor with `blade_count` rigid blades, each sampled by
/// `scatterers_per_blade` equally weighted point scatterers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Propeller {
    /// Hub position in the body frame (m).
    pub mount: Vec3,
    /// Unit rotation axis in the body frame.
    pub spin_axis: Vec3,
    pub blade_count: usize,
    /// Blade length from hub to tip (m).
    pub blade_length: f64,
    /// Revolutions per second (Hz).
    pub rotation_rate: f64,
    /// Blade-0 angle at t = 0 (rad).
    pub initial_phase: f64,
    /// +1 for right-handed rotation about `spin_axis`, -1 otherwise.
    pub spin_sense: i8,
    pub scatterers_per_blade: usize,
    pub blade_reflectivity: Complex64,
}

impl Propeller {
    pub fn new(mount: Vec3, spin_axis: Vec3, rotation_rate: f64) -> Self {
        Self {
            mount,
            spin_axis: spin_axis.normalize(),
            blade_count: 2,
            blade_length: 0.2819,
            rotation_rate,
            initial_phase: 0.0,
            spin_sense: 1,
            scatterers_per_blade: 8,
            blade_reflectivity: Complex64::new(1.0, 0.0),
        }
    }

    pub fn validate(&self, index: usize) -> Result<(), AirframeError> {
        let fail = |constraint| Err(AirframeError::InvalidPropeller { index, constraint });
        if self.blade_count < 1 {
            return fail("blade_count must be >= 1");
        }
        if !(self.blade_length > 0.0 && self.blade_length.is_finite()) {
            return fail("blade_length must be > 0");
        }
        if !(self.rotation_rate >= 0.0 && self.rotation_rate.is_finite()) {
            return fail("rotation_rate must be >= 0");
        }
        if self.scatterers_per_blade < 1 {
            return fail("scatterers_per_blade must be >= 1");
        }
        if (self.spin_axis.norm() - 1.0).abs() > AXIS_TOL {
            return fail("spin_axis must be a unit vector");
        }
        if self.spin_sense != 1 && self.spin_sense != -1 {
            return fail("spin_sense must be +1 or -1");
        }
        if !self.initial_phase.is_finite() || !self.mount.iter().all(|c| c.is_finite()) {
            return fail("mount and initial_phase must be finite");
        }
        if !(self.blade_reflectivity.re.is_finite() && self.blade_reflectivity.im.is_finite()) {
            return fail("blade_reflectivity must be finite");
        }
        Ok(())
    }

    /// Blade-0 direction at zero rotation: the coordinate axis least aligned
    /// with the spin axis, projected onto the rotation plane.
    pub fn reference_direction(&self) -> Vec3 {
        let a = self.spin_axis;
        let basis = [Vec3::x(), Vec3::y(), Vec3::z()];
        let mut e = basis[0];
        for b in &basis[1..] {
            if b.dot(&a).abs() < e.dot(&a).abs() - 1e-12 {
                e = *b;
            }
        }
        (e - a * e.dot(&a)).normalize()
    }

    /// Angular velocity vector in the body frame (rad/s).
    pub fn angular_velocity(&self) -> Vec3 {
        self.spin_axis * (TAU * self.rotation_rate * f64::from(self.spin_sense))
    }

    /// Blade-tip speed 2 pi f_rot L.
    pub fn tip_speed(&self) -> f64 {
        TAU * self.rotation_rate * self.blade_length
    }

    pub fn scatterer_count(&self) -> usize {
        self.blade_count * self.scatterers_per_blade
    }

    /// Body-frame blade scatterers at time `t`; `moving = false` freezes the
    /// rotor at its t = 0 position with zero velocity.
    fn push_states(&self, t: f64, moving: bool, out: &mut Vec<(Vec3, Vec3, Complex64)>) {
        let e1 = self.reference_direction();
        let e2 = self.spin_axis.cross(&e1);
        let omega = self.angular_velocity();
        // Reduce whole turns first so that t and t + k/f_rot give the same angle.
        let turns = if moving { self.rotation_rate * t } else { 0.0 };
        let turns = turns - turns.floor();
        let base = TAU * turns * f64::from(self.spin_sense) + self.initial_phase;
        for b in 0..self.blade_count {
            let psi = base + TAU * b as f64 / self.blade_count as f64;
            let dir = e1 * psi.cos() + e2 * psi.sin();
            for i in 1..=self.scatterers_per_blade {
                let r = dir * (i as f64 / self.scatterers_per_blade as f64 * self.blade_length);
                let vel = if moving { omega.cross(&r) } else { Vec3::zeros() };
                out.push((self.mount + r, vel, self.blade_reflectivity));
            }
        }
    }
}

/// Body position in the world frame and Z-Y-X (yaw, pitch, roll) orientation in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyPose {
    pub position: Vec3,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl Default for BodyPose {
    fn default() -> Self {
        Self { position: Vec3::zeros(), yaw: 0.0, pitch: 0.0, roll: 0.0 }
    }
}

impl BodyPose {
    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_euler_angles(self.roll, self.pitch, self.yaw)
    }

    pub fn to_world(&self, p: &Vec3) -> Vec3 {
        self.position + self.rotation() * p
    }
}

/// Static fuselage return in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyScatterer {
    pub pos: Vec3,
    pub reflectivity: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VtolAirframe {
    pub body_scatterers: Vec<BodyScatterer>,
    pub lifting_props: Vec<Propeller>,
    pub thrust_props: Vec<Propeller>,
    pub body_pose: BodyPose,
}

/// Default lifting-rotor rate (Hz). Arbitrary: the measured rates are not published.
pub const DEFAULT_LIFTING_RATE: f64 = 80.0;
/// Default thrust-rotor rate (Hz). Arbitrary: the measured rates are not published.
pub const DEFAULT_THRUST_RATE: f64 = 100.0;
/// Default thrust-rotor scatterer amplitude relative to the lifting rotors.
pub const DEFAULT_THRUST_REFLECTIVITY: f64 = 15.0;

impl Default for VtolAirframe {
    fn default() -> Self {
        Self::canonical()
    }
}

impl VtolAirframe {
    /// Six vertical-axis lifting rotors on two booms, one pusher rotor at the
    /// tail, three fuselage scatterers. Initial phases are spread
    /// deterministically; use [`VtolAirframe::with_phases`] to randomize.
    pub fn canonical() -> Self {
        let lift_mounts = [
            Vec3::new(0.65, 0.7, 0.1),
            Vec3::new(0.0, 0.75, 0.1),
            Vec3::new(-0.65, 0.7, 0.1),
            Vec3::new(0.65, -0.7, 0.1),
            Vec3::new(0.0, -0.75, 0.1),
            Vec3::new(-0.65, -0.7, 0.1),
        ];
        let lifting_props = lift_mounts
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let mut p = Propeller::new(*m, Vec3::z(), DEFAULT_LIFTING_RATE);
                p.spin_sense = if i % 2 == 0 { 1 } else { -1 };
                p
            })
            .collect();
        let mut thrust = Propeller::new(Vec3::new(-0.9, 0.0, 0.0), Vec3::x(), DEFAULT_THRUST_RATE);
        thrust.blade_reflectivity = Complex64::new(DEFAULT_THRUST_REFLECTIVITY, 0.0);
        let body_scatterers = [Vec3::zeros(), Vec3::new(0.5, 0.0, 0.0), Vec3::new(-0.5, 0.0, 0.0)]
            .iter()
            .map(|p| BodyScatterer { pos: *p, reflectivity: Complex64::new(1.0, 0.0) })
            .collect();
        let mut a = Self { body_scatterers, lifting_props, thrust_props: vec![thrust], body_pose: BodyPose::default() };
        // Golden-ratio spread keeps rotors out of phase without an RNG.
        let phases: Vec<f64> = (0..a.propeller_count()).map(|i| TAU * ((i as f64 * 0.618_033_988_749_895) % 1.0)).collect();
        a.set_phases(&phases);
        a
    }

    /// Replaces initial phases using `draw`, called once per propeller in
    /// lifting-then-thrust order.
    pub fn with_phases(mut self, mut draw: impl FnMut() -> f64) -> Self {
        let phases: Vec<f64> = (0..self.propeller_count()).map(|_| draw()).collect();
        self.set_phases(&phases);
        self
    }

    fn set_phases(&mut self, phases: &[f64]) {
        for (p, ph) in self.lifting_props.iter_mut().chain(self.thrust_props.iter_mut()).zip(phases) {
            p.initial_phase = *ph;
        }
    }

    pub fn propeller_count(&self) -> usize {
        self.lifting_props.len() + self.thrust_props.len()
    }

    pub fn validate(&self) -> Result<(), AirframeError> {
        let all: Vec<&Propeller> = self.lifting_props.iter().chain(self.thrust_props.iter()).collect();
        for (i, p) in all.iter().enumerate() {
            p.validate(i)?;
        }
        if let Some(first) = self.lifting_props.first() {
            for (i, p) in self.lifting_props.iter().enumerate().skip(1) {
                if p.spin_axis.cross(&first.spin_axis).norm() > AXIS_TOL {
                    return Err(AirframeError::LiftingAxesNotParallel(i));
                }
            }
            for (i, p) in self.thrust_props.iter().enumerate() {
                if p.spin_axis.dot(&first.spin_axis).abs() > AXIS_TOL {
                    return Err(AirframeError::ThrustAxisNotOrthogonal(self.lifting_props.len() + i));
                }
            }
        }
        let pose = &self.body_pose;
        if !(pose.position.iter().all(|c| c.is_finite()) && pose.yaw.is_finite() && pose.pitch.is_finite() && pose.roll.is_finite()) {
            return Err(AirframeError::InvalidPose);
        }
        Ok(())
    }

    /// Propellers spinning in `mode`, in body frame.
    pub fn active_propellers(&self, mode: FlightMode) -> Vec<&Propeller> {
        let mut out = Vec::new();
        if mode.lifting_active() {
            out.extend(self.lifting_props.iter());
        }
        if mode.thrust_active() {
            out.extend(self.thrust_props.iter());
        }
        out
    }

    /// Spin axis of a propeller expressed in the world frame.
    pub fn world_axis(&self, prop: &Propeller) -> Vec3 {
        self.body_pose.rotation() * prop.spin_axis
    }

    /// World-frame hub position of a propeller.
    pub fn world_mount(&self, prop: &Propeller) -> Vec3 {
        self.body_pose.to_world(&prop.mount)
    }

    /// All scatterers at time `t` in the world frame: body returns first,
    /// then lifting and thrust rotor blades. Inactive rotors are frozen at
    /// their t = 0 position with zero velocity.
    pub fn scatterer_states(&self, mode: FlightMode, t: f64) -> Vec<ScattererState> {
        let mut body = Vec::with_capacity(self.total_scatterers());
        for s in &self.body_scatterers {
            body.push((s.pos, Vec3::zeros(), s.reflectivity));
        }
        for p in &self.lifting_props {
            p.push_states(t, mode.lifting_active(), &mut body);
        }
        for p in &self.thrust_props {
            p.push_states(t, mode.thrust_active(), &mut body);
        }
        let rot = self.body_pose.rotation();
        body.into_iter()
            .map(|(p, v, a)| ScattererState { pos: self.body_pose.position + rot * p, vel: rot * v, reflectivity: a })
            .collect()
    }

    pub fn total_scatterers(&self) -> usize {
        self.body_scatterers.len()
            + self.lifting_props.iter().chain(self.thrust_props.iter()).map(Propeller::scatterer_count).sum::<usize>()
    }

    /// Largest rotation rate among rotors of the given group that spin in `mode`.
    pub fn max_active_rate(&self, mode: FlightMode, lifting: bool) -> Option<f64> {
        let (active, props) = if lifting {
            (mode.lifting_active(), &self.lifting_props)
        } else {
            (mode.thrust_active(), &self.thrust_props)
        };
        if !active {
            return None;
        }
        props.iter().map(|p| p.rotation_rate).fold(None, |m, r| Some(m.map_or(r, |m: f64| m.max(r))))
    }
}

/// Rotation of `v` about a unit axis by `angle`.
pub fn rotate_about(v: &Vec3, axis: &Vec3, angle: f64) -> Vec3 {
    Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle) * v
}
