//! Scene builders and independent reference formulas shared by integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use vtolmd::airframe::{BodyPose, BodyScatterer, FlightMode, Propeller, VtolAirframe};
use vtolmd::geometry::{BistaticGeometry, Vec3};
use vtolmd::synth::{NoiseSpec, Scene};
use vtolmd::waveform::OfdmConfig;

pub const C: f64 = 299_792_458.0;
pub const FC: f64 = 7e9;
pub const BLADE: f64 = 0.2819;

pub fn default_cfg(m: usize) -> OfdmConfig {
    OfdmConfig::centered(2500, 2048, 2.4e9, FC, m)
}

/// One 2-blade rotor at the origin with a static hub return. The bisector is
/// +x and the spin axis lies in the x-z plane at `theta_deg` from it.
pub fn single_rotor_scene(beta_deg: f64, theta_deg: f64, f_rot: f64, m: usize, range: f64) -> Scene {
    let geom = BistaticGeometry::from_angles(range, beta_deg.to_radians(), 0.0, Vec3::zeros(), FC).unwrap();
    let th = theta_deg.to_radians();
    let mut p = Propeller::new(Vec3::zeros(), Vec3::new(th.cos(), 0.0, th.sin()), f_rot);
    p.initial_phase = 0.3;
    let airframe = VtolAirframe {
        body_scatterers: vec![BodyScatterer { pos: Vec3::zeros(), reflectivity: Complex64::new(4.0, 0.0) }],
        lifting_props: vec![],
        thrust_props: vec![p],
        body_pose: BodyPose::default(),
    };
    let mut s = Scene::new(geom, airframe, FlightMode::Cruise, default_cfg(m));
    s.noise = NoiseSpec::SnrDb(10.0);
    s.noise_seed = 1;
    s
}

/// Default airframe at range 10 m with random rotor phases.
pub fn mode_scene(mode: FlightMode, beta_deg: f64, az_deg: f64, snr_db: f64, seed: u64, rng: &mut impl Rng) -> Scene {
    let geom = BistaticGeometry::from_angles(10.0, beta_deg.to_radians(), az_deg.to_radians(), Vec3::zeros(), FC).unwrap();
    let airframe = VtolAirframe::canonical().with_phases(|| rng.gen_range(0.0..std::f64::consts::TAU));
    let mut s = Scene::new(geom, airframe, mode, default_cfg(16384));
    s.noise = NoiseSpec::SnrDb(snr_db);
    s.noise_seed = seed;
    s
}

/// Total blade-tip Doppler spread: tip speed projected on the bistatic
/// bisector, doubled for both blade sides, over the wavelength.
pub fn reference_spread(f_rot: f64, blade: f64, beta: f64, theta: f64, fc: f64) -> f64 {
    let v_tip = 2.0 * std::f64::consts::PI * f_rot * blade;
    let lambda = C / fc;
    2.0 * (2.0 * v_tip * (beta / 2.0).cos() * theta.sin()) / lambda
}
