//! Receiver, feature and classifier checks on synthetic inputs.

mod common;

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use approx::assert_relative_eq;
use common::{default_cfg, reference_spread, BLADE, C, FC};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vtolmd::airframe::FlightMode;
use vtolmd::classifier::{classify, ClassifierParams, ExpectedSpread};
use vtolmd::features::{
    estimate_period, estimate_rotation_rate, estimate_spike_spacing, predict_doppler_spread, DopplerComponent,
    MicroDopplerFeatures, SpreadParams,
};
use vtolmd::receiver::{doppler_spectrum, range_profile, Window};
use vtolmd::waveform::{signed_index, FreqSymbol, SymbolRole};

fn argmax(x: &[f64]) -> usize {
    x.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0
}

#[test]
fn point_return_lands_in_its_delay_bin() {
    let cfg = default_cfg(1);
    let n = cfg.n_carriers;
    let df = cfg.sample_rate / n as f64;
    for tau_bins in [0.0, 17.0, 57.4, 812.0] {
        let tau = tau_bins / cfg.sample_rate;
        let mut h = FreqSymbol::zeros(n, SymbolRole::Channel);
        for &i in &cfg.energized {
            h.bins[i] = Complex64::from_polar(1.0, -TAU * signed_index(i, n) as f64 * df * tau);
        }
        let p = range_profile(&h, &cfg, Window::Hann, 0);
        let power: Vec<f64> = p.bins.iter().map(|c| c.norm_sqr()).collect();
        assert_eq!(argmax(&power), (tau_bins.round() as usize) % n, "delay {tau_bins} bins");
        assert_relative_eq!(p.delay_step, 1.0 / cfg.sample_rate, max_relative = 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tone_peaks_at_its_doppler_bin(frac in -0.45..0.45f64, phase in 0.0..TAU) {
        let cfg = default_cfg(2048);
        let t = cfg.symbol_period();
        let f = frac / t;
        let v: Vec<Complex64> = (0..cfg.n_symbols).map(|m| Complex64::from_polar(1.0, TAU * f * m as f64 * t + phase)).collect();
        let s = doppler_spectrum(&v, t, Window::Hann).unwrap();
        let k = argmax(&s.power_db);
        prop_assert!((s.freqs_hz[k] - f).abs() <= 0.5 * s.bin_hz + 1e-6);
        prop_assert!(s.power_db[k] == 0.0);
        prop_assert!((s.bin_hz - 1.0 / (cfg.n_symbols as f64 * t)).abs() < 1e-9);
    }

    #[test]
    fn predicted_spread_matches_reference(f in 1.0..200.0f64, l in 0.05..1.0f64, beta in 0.0..PI, theta in 0.0..FRAC_PI_2) {
        let got = predict_doppler_spread(f, l, beta, theta, C / FC).unwrap();
        let want = reference_spread(f, l, beta, theta, FC);
        prop_assert!((got - want).abs() <= 1e-9 * want.max(1.0));
    }

    #[test]
    fn period_of_blade_flashes(period in 40usize..400, width in 1.5..4.0f64, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = 1e-6;
        let v: Vec<Complex64> = (0..4096)
            .map(|m| {
                let d = (m % period) as f64 - period as f64 / 2.0;
                let flash = 5.0 * (-d * d / (2.0 * width * width)).exp();
                Complex64::new(1.0 + flash + rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05))
            })
            .collect();
        let got = estimate_period(&v, t).unwrap();
        prop_assert!((got / t - period as f64).abs() <= 1.0, "{} vs {}", got / t, period);
    }

    // Lines closer than about 3 bins merge under the Hann main lobe.
    #[test]
    fn comb_spacing_recovered(spacing in 250.0..600.0f64, lines in 8i32..20, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = default_cfg(16384);
        let t = cfg.symbol_period();
        let phases: Vec<f64> = (-lines..=lines).map(|_| rng.gen_range(0.0..TAU)).collect();
        let v: Vec<Complex64> = (0..cfg.n_symbols)
            .map(|m| {
                let tm = m as f64 * t;
                (-lines..=lines)
                    .zip(&phases)
                    .map(|(k, p)| Complex64::from_polar(1.0, TAU * k as f64 * spacing * tm + p))
                    .sum::<Complex64>()
                    + Complex64::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1))
            })
            .collect();
        let s = doppler_spectrum(&v, t, Window::Hann).unwrap();
        let got = estimate_spike_spacing(&s, &SpreadParams::default()).unwrap();
        prop_assert!((got - spacing).abs() <= s.bin_hz, "{} vs {}", got, spacing);
        let rate = estimate_rotation_rate(got, 2).unwrap();
        prop_assert!((rate - got / 2.0).abs() < 1e-12);
    }
}

#[test]
fn default_geometry_spread() {
    // Thrust rotor at 100 Hz seen at beta = 60 deg with the bisector in its rotation plane.
    let b = predict_doppler_spread(100.0, BLADE, 60f64.to_radians(), FRAC_PI_2, C / FC).unwrap();
    assert_relative_eq!(b, reference_spread(100.0, BLADE, 60f64.to_radians(), FRAC_PI_2, FC), max_relative = 1e-12);
    assert!((b - 14327.0).abs() < 1.0, "{b}");
    assert!(predict_doppler_spread(100.0, BLADE, PI, FRAC_PI_2, C / FC).unwrap().abs() < 1e-9);
    assert!(predict_doppler_spread(100.0, BLADE, 0.0, 0.0, C / FC).unwrap().abs() < 1e-9);
}

fn component() -> impl Strategy<Value = DopplerComponent> {
    (100.0..20000.0f64, -60.0..0.0f64).prop_map(|(spread, peak)| DopplerComponent {
        spread_hz: spread,
        center_hz: 0.0,
        peak_db: peak,
        lo_hz: -spread / 2.0,
        hi_hz: spread / 2.0,
        nested_contrast_db: None,
    })
}

fn features(components: Vec<DopplerComponent>) -> MicroDopplerFeatures {
    let mut f = MicroDopplerFeatures::empty(71.5);
    f.max_power_db = 0.0;
    f.doppler_spread_hz = components.iter().map(|c| c.spread_hz).fold(None, |m, s| Some(m.map_or(s, |m: f64| m.max(s))));
    f.components = components;
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn confidence_is_bounded(cs in prop::collection::vec(component(), 0..5), lift in 1000.0..20000.0f64, thrust in 500.0..20000.0f64) {
        let exp = ExpectedSpread { lifting_hz: lift, thrust_hz: thrust };
        let d = classify(&features(cs), &exp, &ClassifierParams::default());
        prop_assert!((0.0..=1.0).contains(&d.confidence), "{}", d.confidence);
        if d.mode.is_none() {
            prop_assert_eq!(d.confidence, 0.0);
        }
    }

    #[test]
    fn decision_ignores_common_level_offset(cs in prop::collection::vec(component(), 1..5), offset in -40.0..40.0f64) {
        let exp = ExpectedSpread { lifting_hz: 11000.0, thrust_hz: 3000.0 };
        let a = classify(&features(cs.clone()), &exp, &ClassifierParams::default());
        let shifted: Vec<DopplerComponent> = cs.iter().map(|c| DopplerComponent { peak_db: c.peak_db + offset, ..*c }).collect();
        let mut f = features(shifted);
        f.max_power_db += offset;
        let b = classify(&f, &exp, &ClassifierParams::default());
        prop_assert_eq!(a.mode, b.mode);
        prop_assert!((a.confidence - b.confidence).abs() < 1e-9);
    }
}

#[test]
fn rule_table() {
    let exp = ExpectedSpread { lifting_hz: 11000.0, thrust_hz: 3000.0 };
    let c = |spread: f64, peak: f64| DopplerComponent {
        spread_hz: spread,
        center_hz: 0.0,
        peak_db: peak,
        lo_hz: -spread / 2.0,
        hi_hz: spread / 2.0,
        nested_contrast_db: None,
    };
    let p = ClassifierParams::default();
    assert_eq!(classify(&features(vec![c(11000.0, 0.0)]), &exp, &p).mode, Some(FlightMode::VerticalFlight));
    assert_eq!(classify(&features(vec![c(11000.0, 0.0), c(3000.0, -3.0)]), &exp, &p).mode, Some(FlightMode::Transition));
    assert_eq!(classify(&features(vec![c(3000.0, -1.0)]), &exp, &p).mode, Some(FlightMode::Cruise));
    assert_eq!(classify(&features(vec![c(3000.0, -30.0)]), &exp, &p).mode, None);
    assert_eq!(classify(&features(vec![]), &exp, &p).mode, None);
    let d = classify(&features(vec![c(11000.0, 0.0)]), &exp, &p);
    let split = exp.split_hz();
    assert_relative_eq!(d.confidence, ((11000.0 - split) / split).min(1.0), max_relative = 1e-12);
}
