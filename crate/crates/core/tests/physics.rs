//! Geometry, airframe, waveform and channel checks against direct formulas.

mod common;

use std::f64::consts::{PI, TAU};

use approx::assert_relative_eq;
use common::{single_rotor_scene, C, FC};
use num_complex::Complex64;
use proptest::prelude::*;
use vtolmd::airframe::{FlightMode, Propeller, VtolAirframe};
use vtolmd::geometry::{bistatic_angle, bistatic_delay, bistatic_doppler, BistaticGeometry, ScattererState, Vec3};
use vtolmd::synth::{noise_variance, received_symbol, ChannelSynth, NoiseSpec, NoiseStream};
use vtolmd::waveform::{crest_factor_db, newman_symbol, signed_index, zero_phase_symbol, OfdmConfig, SymbolRole};

fn vec3() -> impl Strategy<Value = Vec3> {
    (-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn path_length(g: &BistaticGeometry, p: &Vec3) -> f64 {
    (p - g.tx()).norm() + (p - g.rx()).norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn doppler_matches_path_length_rate(p in vec3(), v in vec3(), az in 0.0..TAU, beta in 0.2..3.0f64) {
        let g = BistaticGeometry::from_angles(200.0, beta, az, Vec3::zeros(), FC).unwrap();
        let s = ScattererState { pos: p, vel: v, reflectivity: Complex64::new(1.0, 0.0) };
        let h = 1e-6;
        let rate = (path_length(&g, &(p + v * h)) - path_length(&g, &(p - v * h))) / (2.0 * h);
        let fd = -rate * FC / C;
        prop_assert!((bistatic_doppler(&g, &s) - fd).abs() < 1e-3 * (1.0 + fd.abs()));
        prop_assert!((bistatic_delay(&g, &p) - path_length(&g, &p) / C).abs() < 1e-18);
    }

    #[test]
    fn swapping_tx_and_rx_changes_nothing(p in vec3(), v in vec3(), t in vec3(), r in vec3()) {
        prop_assume!((t - p).norm() > 1.0 && (r - p).norm() > 1.0);
        let a = BistaticGeometry::new(t, r, p, FC).unwrap();
        let b = BistaticGeometry::new(r, t, p, FC).unwrap();
        let s = ScattererState { pos: p, vel: v, reflectivity: Complex64::new(1.0, 0.0) };
        prop_assert!((bistatic_doppler(&a, &s) - bistatic_doppler(&b, &s)).abs() < 1e-9 * (1.0 + bistatic_doppler(&a, &s).abs()));
        prop_assert!((bistatic_angle(&a, &p).unwrap() - bistatic_angle(&b, &p).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn from_angles_realizes_requested_beta(beta in 0.01..PI, az in -PI..PI, range in 1.0..5000.0f64) {
        let g = BistaticGeometry::from_angles(range, beta, az, Vec3::zeros(), FC).unwrap();
        let got = bistatic_angle(&g, &Vec3::zeros()).unwrap();
        prop_assert!((got - beta).abs() < 1e-9);
        prop_assert!((0.0..=PI).contains(&got));
    }

    #[test]
    fn rotor_states_repeat_after_one_turn(rate in 10.0..150.0f64, t in 0.0..0.1f64, phase in 0.0..TAU) {
        let mut af = VtolAirframe::canonical();
        for p in af.lifting_props.iter_mut() {
            p.rotation_rate = rate;
            p.initial_phase = phase;
        }
        let a = af.scatterer_states(FlightMode::VerticalFlight, t);
        let b = af.scatterer_states(FlightMode::VerticalFlight, t + 1.0 / rate);
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.pos - y.pos).norm() < 1e-9);
            prop_assert!((x.vel - y.vel).norm() < 1e-6);
        }
    }

    #[test]
    fn newman_symbol_has_unit_energized_bins(n in 16usize..600, frac in 0.1..1.0f64) {
        let k = ((n as f64 * frac) as usize).max(1);
        let cfg = OfdmConfig::centered(n, k, 1e6 * k as f64, FC, 4);
        let x = newman_symbol(&cfg).unwrap();
        let mask = cfg.energized_mask();
        for (c, on) in x.bins.iter().zip(&mask) {
            let want = if *on { 1.0 } else { 0.0 };
            prop_assert!((c.norm() - want).abs() < 1e-12);
        }
        prop_assert_eq!(x.role, SymbolRole::Transmit);
    }
}

#[test]
fn blade_velocity_is_derivative_of_position() {
    let af = VtolAirframe::canonical();
    let t = 0.0123;
    let h = 1e-7;
    let s = af.scatterer_states(FlightMode::Transition, t);
    let lo = af.scatterer_states(FlightMode::Transition, t - h);
    let hi = af.scatterer_states(FlightMode::Transition, t + h);
    for i in 0..s.len() {
        let fd = (hi[i].pos - lo[i].pos) / (2.0 * h);
        assert!((fd - s[i].vel).norm() < 1e-4 * (1.0 + s[i].vel.norm()), "scatterer {i}");
    }
}

#[test]
fn rotor_scatterer_count_and_tip_speed() {
    let mut p = Propeller::new(Vec3::zeros(), Vec3::z(), 100.0);
    p.blade_count = 3;
    p.scatterers_per_blade = 5;
    assert_eq!(p.scatterer_count(), 15);
    assert_relative_eq!(p.tip_speed(), TAU * 100.0 * p.blade_length, max_relative = 1e-15);
    let af = VtolAirframe::canonical();
    let max_tip = af
        .scatterer_states(FlightMode::VerticalFlight, 0.0)
        .iter()
        .map(|s| s.vel.norm())
        .fold(0.0, f64::max);
    assert_relative_eq!(max_tip, af.lifting_props[0].tip_speed(), max_relative = 1e-9);
}

/// Peak-to-mean power of the oversampled time signal by a direct sum.
fn crest_oracle(bins: &[Complex64], over: usize) -> f64 {
    let n = bins.len();
    let l = n * over;
    let p: Vec<f64> = (0..l)
        .map(|t| {
            bins.iter()
                .enumerate()
                .map(|(i, c)| c * Complex64::from_polar(1.0, TAU * signed_index(i, n) as f64 * t as f64 / l as f64))
                .sum::<Complex64>()
                .norm_sqr()
        })
        .collect();
    let peak = p.iter().cloned().fold(0.0, f64::max);
    10.0 * (peak / (p.iter().sum::<f64>() / l as f64)).log10()
}

#[test]
fn crest_factor_matches_direct_sum() {
    let cfg = OfdmConfig::centered(100, 64, 64e6, FC, 4);
    let x = newman_symbol(&cfg).unwrap();
    assert_relative_eq!(crest_factor_db(&x).unwrap(), crest_oracle(&x.bins, 4), epsilon = 1e-9);
    let z = zero_phase_symbol(&cfg);
    let zc = crest_factor_db(&z).unwrap();
    assert_relative_eq!(zc, crest_oracle(&z.bins, 4), epsilon = 1e-9);
    // All tones in phase peak at K times the mean power.
    assert_relative_eq!(zc, 10.0 * 64f64.log10(), epsilon = 1e-9);
}

/// Channel as a plain sum over scatterers and carriers.
fn channel_oracle(states: &[ScattererState], g: &BistaticGeometry, cfg: &OfdmConfig) -> Vec<Complex64> {
    let n = cfg.n_carriers;
    let df = cfg.sample_rate / n as f64;
    (0..n)
        .map(|i| {
            let f = cfg.center_freq + signed_index(i, n) as f64 * df;
            states
                .iter()
                .map(|s| {
                    let dt = (s.pos - g.tx()).norm();
                    let dr = (s.pos - g.rx()).norm();
                    let tau = (dt + dr) / C;
                    s.reflectivity / (dt * dr) * Complex64::from_polar(1.0, -TAU * f * tau)
                })
                .sum()
        })
        .collect()
}

#[test]
fn channel_matches_direct_sum() {
    let scene = single_rotor_scene(60.0, 70.0, 100.0, 64, 10.0);
    let synth = ChannelSynth::new(&scene);
    for m in [0, 17, 63] {
        let states = scene.airframe.scatterer_states(scene.mode, scene.symbol_time(m));
        let want = channel_oracle(&states, &scene.geometry, &scene.cfg);
        let got = synth.snapshot(m).unwrap().h.bins;
        let scale = want.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (i, (a, b)) in got.iter().zip(&want).enumerate() {
            assert!((a - b).norm() < 1e-9 * scale, "symbol {m} bin {i}: {a} vs {b}");
        }
    }
}

#[test]
fn realized_noise_power_matches_requested_snr() {
    let scene = single_rotor_scene(60.0, 70.0, 100.0, 8, 10.0);
    let x = newman_symbol(&scene.cfg).unwrap();
    let snap = ChannelSynth::new(&scene).snapshot(3).unwrap();
    let stream = NoiseStream::new(11);
    let y = received_symbol(&snap, &x, NoiseSpec::SnrDb(10.0), &stream).unwrap();
    let mut w = 0.0;
    let mut k = 0;
    for i in 0..y.len() {
        if x.bins[i].norm_sqr() > 0.0 {
            w += (y.bins[i] - snap.h.bins[i] * x.bins[i]).norm_sqr();
            k += 1;
        }
    }
    let sigma2 = noise_variance(&snap.h, &x, 10.0);
    // 2048 complex samples: relative standard error about 2%.
    assert_relative_eq!(w / k as f64, sigma2, max_relative = 0.08);
}

#[test]
fn noise_is_keyed_by_symbol_not_call_order() {
    let s = NoiseStream::new(42);
    let a = s.unit_samples(9, 64);
    let _ = s.unit_samples(3, 64);
    assert_eq!(a, s.unit_samples(9, 64));
    assert_ne!(a, s.unit_samples(10, 64));
    assert_ne!(a, NoiseStream::new(43).unit_samples(9, 64));
    let big = s.unit_samples(0, 100_000);
    let mean_pow = big.iter().map(|c| c.norm_sqr()).sum::<f64>() / big.len() as f64;
    assert_relative_eq!(mean_pow, 1.0, max_relative = 0.02);
}
