//! Forward model: per-symbol frequency-domain channel of all scatterers
//! (stop-and-hop), and receive symbols with counter-keyed Gaussian noise.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airframe::{AirframeError, FlightMode, VtolAirframe};
use crate::geometry::{BistaticGeometry, ScattererState, SPEED_OF_LIGHT};
use crate::waveform::{signed_index, FreqSymbol, OfdmConfig, SymbolRole, WaveformError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("symbol index {m} outside 0..{n_symbols}")]
    SymbolOutOfRange { m: usize, n_symbols: usize },
    #[error("snr_db must be finite, got {0}")]
    InvalidSnr(f64),
    #[error("symbol length {got} does not match n_carriers {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Airframe(#[from] AirframeError),
    #[error(transparent)]
    Waveform(#[from] WaveformError),
}

/// Receiver noise setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseSpec {
    Noiseless,
    /// Per energized bin: mean |H X|^2 / E|w|^2 in dB.
    SnrDb(f64),
}

/// Delay origin for synthesized channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DelayReference {
    /// True bistatic delay tx -> target -> rx.
    #[default]
    Absolute,
    /// Delay relative to the direct tx -> rx path.
    DirectPath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub geometry: BistaticGeometry,
    pub airframe: VtolAirframe,
    pub mode: FlightMode,
    pub cfg: OfdmConfig,
    pub noise: NoiseSpec,
    pub noise_seed: u64,
    pub delay_reference: DelayReference,
    /// Amplitude of an injected line-of-sight path, relative to 1/baseline. None excludes it.
    pub direct_path_gain: Option<f64>,
}

impl Scene {
    pub fn new(geometry: BistaticGeometry, airframe: VtolAirframe, mode: FlightMode, cfg: OfdmConfig) -> Self {
        Self {
            geometry,
            airframe,
            mode,
            cfg,
            noise: NoiseSpec::Noiseless,
            noise_seed: 0,
            delay_reference: DelayReference::Absolute,
            direct_path_gain: None,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        self.airframe.validate()?;
        self.cfg.validate()?;
        if let NoiseSpec::SnrDb(s) = self.noise {
            if !s.is_finite() {
                return Err(SynthError::InvalidSnr(s));
            }
        }
        Ok(())
    }

    /// Slow time of symbol `m`.
    pub fn symbol_time(&self, m: usize) -> f64 {
        m as f64 * self.cfg.symbol_period()
    }

    /// Upper bound on |Doppler| over the spinning blade tips (2 v_tip / lambda).
    pub fn max_doppler_bound(&self) -> f64 {
        self.airframe
            .active_propellers(self.mode)
            .iter()
            .map(|p| 2.0 * p.tip_speed() / self.geometry.wavelength())
            .fold(0.0, f64::max)
    }

    /// True when blade-tip Doppler may exceed the unambiguous span 1/(2T).
    pub fn doppler_may_alias(&self) -> bool {
        self.max_doppler_bound() > 0.5 / self.cfg.symbol_period()
    }
}

/// Channel of one symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSnapshot {
    pub h: FreqSymbol,
    pub m: usize,
    pub t: f64,
}

/// Contiguous bin ranges that do not cross the positive/negative frequency wrap.
fn bin_runs(mask: &[bool]) -> Vec<(usize, usize)> {
    let n = mask.len();
    let half = n.div_ceil(2);
    let mut runs = Vec::new();
    let mut i = 0;
    while i < n {
        if !mask[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && mask[i] && !(i == half && start < half) {
            i += 1;
        }
        runs.push((start, i));
    }
    runs
}

/// Bins recomputed exactly from the closed form, bounding recursion drift.
const ANCHOR_BLOCK: usize = 256;

/// Channel synthesizer bound to a scene; reuses the bin layout across symbols.
pub struct ChannelSynth<'a> {
    scene: &'a Scene,
    runs: Vec<(usize, usize)>,
    delay_offset: f64,
}

impl<'a> ChannelSynth<'a> {
    /// Synthesizer over all N bins.
    pub fn new(scene: &'a Scene) -> Self {
        Self::with_mask(scene, &vec![true; scene.cfg.n_carriers])
    }

    /// Synthesizer that only evaluates bins where `mask` is true; other bins stay zero.
    pub fn with_mask(scene: &'a Scene, mask: &[bool]) -> Self {
        let delay_offset = match scene.delay_reference {
            DelayReference::Absolute => 0.0,
            DelayReference::DirectPath => scene.geometry.baseline() / SPEED_OF_LIGHT,
        };
        Self { scene, runs: bin_runs(mask), delay_offset }
    }

    /// Adds the contribution of one point with amplitude `amp` and delay `tau`.
    fn accumulate(&self, amp: Complex64, tau: f64, out: &mut [Complex64]) {
        let cfg = &self.scene.cfg;
        let n_total = cfg.n_carriers;
        let df = cfg.carrier_spacing();
        let fc = cfg.center_freq;
        let step = Complex64::from_polar(1.0, -TAU * df * tau);
        let step2 = step * step;
        let step4 = step2 * step2;
        for &(start, end) in &self.runs {
            let mut b0 = start;
            while b0 < end {
                let b1 = (b0 + ANCHOR_BLOCK).min(end);
                let f0 = fc + signed_index(b0, n_total) as f64 * df;
                // Phase reduced in cycles before scaling keeps large f_c tau accurate.
                let cycles = f0 * tau;
                let p0 = amp * Complex64::from_polar(1.0, -TAU * (cycles - cycles.round()));
                let mut lanes = [p0, p0 * step, p0 * step2, p0 * step2 * step];
                let chunk = &mut out[b0..b1];
                let mut iter = chunk.chunks_exact_mut(4);
                for c in iter.by_ref() {
                    for l in 0..4 {
                        c[l] += lanes[l];
                        lanes[l] *= step4;
                    }
                }
                for (l, v) in iter.into_remainder().iter_mut().enumerate() {
                    *v += lanes[l];
                }
                b0 = b1;
            }
        }
    }

    /// Adds the channel of explicit scatterer states into `out` (length N).
    pub fn add_scatterers(&self, states: &[ScattererState], out: &mut [Complex64]) {
        let g = &self.scene.geometry;
        let (tx, rx) = (g.tx(), g.rx());
        for s in states {
            let dt = (s.pos - tx).norm();
            let dr = (s.pos - rx).norm();
            let amp = s.reflectivity / (dt * dr);
            let tau = (dt + dr) / SPEED_OF_LIGHT - self.delay_offset;
            self.accumulate(amp, tau, out);
        }
    }

    /// Channel of symbol `m` written into `out` (length N, overwritten).
    pub fn channel_into(&self, m: usize, out: &mut [Complex64]) {
        out.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        let states = self.scene.airframe.scatterer_states(self.scene.mode, self.scene.symbol_time(m));
        self.add_scatterers(&states, out);
        if let Some(gain) = self.scene.direct_path_gain {
            let d = self.scene.geometry.baseline();
            let tau = d / SPEED_OF_LIGHT - self.delay_offset;
            self.accumulate(Complex64::new(gain / d, 0.0), tau, out);
        }
    }

    pub fn snapshot(&self, m: usize) -> Result<ChannelSnapshot, SynthError> {
        let n_symbols = self.scene.cfg.n_symbols;
        if m >= n_symbols {
            return Err(SynthError::SymbolOutOfRange { m, n_symbols });
        }
        let mut h = FreqSymbol::zeros(self.scene.cfg.n_carriers, SymbolRole::Channel);
        self.channel_into(m, &mut h.bins);
        Ok(ChannelSnapshot { h, m, t: self.scene.symbol_time(m) })
    }
}

/// H_m over all N bins.
pub fn synthesize_channel(scene: &Scene, m: usize) -> Result<ChannelSnapshot, SynthError> {
    ChannelSynth::new(scene).snapshot(m)
}

/// Counter-keyed circular Gaussian noise: the value for (seed, m, n) does not
/// depend on which symbols are generated or in what order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseStream {
    pub seed: u64,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Unit-variance (E|w|^2 = 1) samples for bins 0..n of symbol `m`.
    pub fn unit_samples(&self, m: usize, n: usize) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(m as u64);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        (0..n)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re * s, im * s)
            })
            .collect()
    }
}

/// Noise variance that sets mean |H X|^2 over energized bins (X != 0) to `snr_db` above it.
pub fn noise_variance(h: &FreqSymbol, x: &FreqSymbol, snr_db: f64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (hv, xv) in h.bins.iter().zip(&x.bins) {
        if xv.norm_sqr() > 0.0 {
            sum += (hv * xv).norm_sqr();
            count += 1;
        }
    }
    if count == 0 {
        return 0.0;
    }
    sum / count as f64 / 10f64.powf(snr_db / 10.0)
}

/// Y = H X + w for one symbol.
pub fn received_symbol(
    snapshot: &ChannelSnapshot,
    x: &FreqSymbol,
    noise: NoiseSpec,
    stream: &NoiseStream,
) -> Result<FreqSymbol, SynthError> {
    let n = snapshot.h.len();
    if x.len() != n {
        return Err(SynthError::LengthMismatch { expected: n, got: x.len() });
    }
    let mut y = FreqSymbol {
        bins: snapshot.h.bins.iter().zip(&x.bins).map(|(h, x)| h * x).collect(),
        role: SymbolRole::Receive,
    };
    if let NoiseSpec::SnrDb(snr) = noise {
        if !snr.is_finite() {
            return Err(SynthError::InvalidSnr(snr));
        }
        let sigma = noise_variance(&snapshot.h, x, snr).sqrt();
        for (v, w) in y.bins.iter_mut().zip(stream.unit_samples(snapshot.m, n)) {
            *v += w * sigma;
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airframe::{BodyPose, BodyScatterer, Propeller};
    use crate::geometry::{bistatic_delay, Vec3};
    use crate::waveform::{carrier_frequencies, newman_symbol};
    use approx::assert_relative_eq;

    fn small_cfg() -> OfdmConfig {
        OfdmConfig::centered(64, 48, 100e6, 7e9, 32)
    }

    fn static_scene(points: &[Vec3]) -> Scene {
        let geom = BistaticGeometry::from_angles(10.0, 1.0, 0.2, Vec3::zeros(), 7e9).unwrap();
        let airframe = VtolAirframe {
            body_scatterers: points.iter().map(|p| BodyScatterer { pos: *p, reflectivity: Complex64::new(1.0, 0.0) }).collect(),
            lifting_props: vec![],
            thrust_props: vec![],
            body_pose: BodyPose::default(),
        };
        Scene::new(geom, airframe, FlightMode::VerticalFlight, small_cfg())
    }

    /// Direct evaluation of the channel sum, used as an oracle for the recursion.
    fn direct_channel(scene: &Scene, m: usize) -> Vec<Complex64> {
        let f = carrier_frequencies(&scene.cfg);
        let g = &scene.geometry;
        let states = scene.airframe.scatterer_states(scene.mode, scene.symbol_time(m));
        f.iter()
            .map(|fn_| {
                states
                    .iter()
                    .map(|s| {
                        let tau = bistatic_delay(g, &s.pos);
                        let a = s.reflectivity / ((s.pos - g.tx()).norm() * (s.pos - g.rx()).norm());
                        a * Complex64::from_polar(1.0, -TAU * (scene.cfg.center_freq + fn_) * tau)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn recursion_matches_direct_sum() {
        let mut scene = static_scene(&[Vec3::new(0.1, 0.2, 0.0)]);
        scene.cfg = OfdmConfig::default();
        let mut p = Propeller::new(Vec3::new(0.3, 0.0, 0.0), Vec3::z(), 90.0);
        p.scatterers_per_blade = 3;
        scene.airframe.lifting_props.push(p);
        let h = synthesize_channel(&scene, 7).unwrap().h;
        let d = direct_channel(&scene, 7);
        let scale = d.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (a, b) in h.bins.iter().zip(&d) {
            assert!((a - b).norm() <= 1e-11 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn static_channel_constant_in_time() {
        let scene = static_scene(&[Vec3::new(0.1, 0.2, 0.0)]);
        let a = synthesize_channel(&scene, 0).unwrap();
        let b = synthesize_channel(&scene, 31).unwrap();
        assert_eq!(a.h, b.h);
    }

    #[test]
    fn linear_phase_slope() {
        let scene = static_scene(&[Vec3::new(0.1, 0.2, 0.0)]);
        let h = synthesize_channel(&scene, 0).unwrap().h;
        let tau = bistatic_delay(&scene.geometry, &Vec3::new(0.1, 0.2, 0.0));
        let df = scene.cfg.carrier_spacing();
        let dphi = (h.bins[2] / h.bins[1]).arg();
        let want = (-TAU * df * tau + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI;
        assert_relative_eq!(dphi, want, epsilon = 1e-9);
        assert_relative_eq!(h.bins[1].norm(), h.bins[20].norm(), max_relative = 1e-12);
    }

    #[test]
    fn coincident_scatterers_double() {
        let p = Vec3::new(0.1, 0.2, 0.0);
        let one = synthesize_channel(&static_scene(&[p]), 0).unwrap().h;
        let two = synthesize_channel(&static_scene(&[p, p]), 0).unwrap().h;
        for (a, b) in one.bins.iter().zip(&two.bins) {
            assert_relative_eq!((a * 2.0 - b).norm(), 0.0, epsilon = 1e-18);
        }
    }

    #[test]
    fn out_of_range_symbol() {
        let scene = static_scene(&[Vec3::zeros()]);
        assert!(matches!(synthesize_channel(&scene, 32), Err(SynthError::SymbolOutOfRange { .. })));
    }

    #[test]
    fn noiseless_receive_is_product() {
        let scene = static_scene(&[Vec3::new(0.3, -0.1, 0.2)]);
        let snap = synthesize_channel(&scene, 3).unwrap();
        let x = newman_symbol(&scene.cfg).unwrap();
        let y = received_symbol(&snap, &x, NoiseSpec::Noiseless, &NoiseStream::new(1)).unwrap();
        for ((y, h), x) in y.bins.iter().zip(&snap.h.bins).zip(&x.bins) {
            assert_eq!(*y, h * x);
        }
    }

    #[test]
    fn noise_variance_matches_nominal() {
        let mut scene = static_scene(&[Vec3::new(0.3, -0.1, 0.2)]);
        scene.cfg = OfdmConfig::centered(100_000, 100_000, 1e9, 7e9, 2);
        let snap = synthesize_channel(&scene, 1).unwrap();
        let x = newman_symbol(&scene.cfg).unwrap();
        let y = received_symbol(&snap, &x, NoiseSpec::SnrDb(10.0), &NoiseStream::new(99)).unwrap();
        let nominal = noise_variance(&snap.h, &x, 10.0);
        let emp = y.bins.iter().zip(&snap.h.bins).zip(&x.bins).map(|((y, h), x)| (y - h * x).norm_sqr()).sum::<f64>() / 1e5;
        assert!((emp / nominal - 1.0).abs() < 0.03, "ratio {}", emp / nominal);
    }

    #[test]
    fn noise_keyed_by_symbol_not_order() {
        let s = NoiseStream::new(5);
        let a = s.unit_samples(9, 16);
        let _ = s.unit_samples(3, 16);
        assert_eq!(a, s.unit_samples(9, 16));
        assert_ne!(a, s.unit_samples(10, 16));
        assert_eq!(&s.unit_samples(9, 32)[..16], &a[..]);
    }

    #[test]
    fn masked_synthesis_matches_full_on_mask() {
        let mut scene = static_scene(&[Vec3::new(0.1, 0.2, 0.0)]);
        scene.cfg = OfdmConfig::default();
        let mask = scene.cfg.energized_mask();
        let full = ChannelSynth::new(&scene).snapshot(0).unwrap().h;
        let part = ChannelSynth::with_mask(&scene, &mask).snapshot(0).unwrap().h;
        for (i, m) in mask.iter().enumerate() {
            if *m {
                assert!((full.bins[i] - part.bins[i]).norm() <= 1e-12 * full.bins[i].norm());
            } else {
                assert_eq!(part.bins[i], Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn runs_split_at_frequency_wrap() {
        let mask = vec![true; 10];
        assert_eq!(bin_runs(&mask), vec![(0, 5), (5, 10)]);
        let mut m = vec![false; 10];
        m[1] = true;
        m[2] = true;
        m[8] = true;
        assert_eq!(bin_runs(&m), vec![(1, 3), (8, 9)]);
    }
}
