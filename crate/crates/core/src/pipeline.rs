//! End-to-end processing: scene synthesis through gating, then spectral
//! analysis, feature extraction and classification of a slow-time matrix.
//!
//! Synthesis runs in two passes so full range profiles are never stored:
//! detection on an evenly strided subset of symbols, then all symbols with
//! only the gated range bins kept.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{classify, ClassifierError, ClassifierParams, ExpectedSpread, FlightModeDecision};
use crate::features::{extract_features, FeatureParams, MicroDopplerFeatures};
use crate::receiver::{
    detect_in_power, doppler_spectrum, estimate_channel, integrate_profiles, range_doppler, stft_spectrogram, Detection,
    DetectionParams, DopplerSpectrum, ProfileMeta, RangeDopplerMap, RangeGate, RangeProcessor, RangeProfile, ReceiverError,
    SlowTimeMatrix, Spectrogram, Window, MIN_DETECTION_PROFILES,
};
use crate::synth::{received_symbol, ChannelSynth, NoiseStream, Scene, SynthError};
use crate::waveform::{newman_symbol, FreqSymbol, WaveformError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no target detected")]
    NoTarget,
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Receiver(#[from] ReceiverError),
    #[error(transparent)]
    Waveform(#[from] WaveformError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessingParams {
    pub detection: DetectionParams,
    /// Symbols used for detection, evenly spread over the observation.
    pub detection_symbols: usize,
    pub range_window: Window,
    pub doppler_window: Window,
    pub spectrogram_window_len: usize,
    pub spectrogram_hop: usize,
    pub features: FeatureParams,
    pub classifier: ClassifierParams,
}

impl Default for ProcessingParams {
    fn default() -> Self {
        Self {
            detection: DetectionParams::default(),
            detection_symbols: 512,
            range_window: Window::Hann,
            doppler_window: Window::Hann,
            spectrogram_window_len: 128,
            spectrogram_hop: 32,
            features: FeatureParams::default(),
            classifier: ClassifierParams::default(),
        }
    }
}

/// Result of synthesizing and gating a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub stm: SlowTimeMatrix,
    pub gate: RangeGate,
    /// Noncoherently integrated detection profile.
    pub integrated: Vec<f64>,
}

/// Per-symbol receive chain bound to one scene.
struct SymbolChain<'a> {
    scene: &'a Scene,
    synth: ChannelSynth<'a>,
    x: FreqSymbol,
    ranger: RangeProcessor,
    noise: NoiseStream,
}

impl<'a> SymbolChain<'a> {
    fn new(scene: &'a Scene, window: Window) -> Result<Self, PipelineError> {
        scene.validate()?;
        let x = newman_symbol(&scene.cfg)?;
        Ok(Self {
            scene,
            synth: ChannelSynth::with_mask(scene, &scene.cfg.energized_mask()),
            x,
            ranger: RangeProcessor::new(&scene.cfg, window),
            noise: NoiseStream::new(scene.noise_seed),
        })
    }

    fn profile(&self, m: usize) -> Result<RangeProfile, PipelineError> {
        let snap = self.synth.snapshot(m)?;
        let y = received_symbol(&snap, &self.x, self.scene.noise, &self.noise)?;
        let est = estimate_channel(&y, &self.x, &self.scene.cfg)?;
        Ok(self.ranger.profile(&est.h, m))
    }
}

/// Evenly strided symbol indices used for detection.
pub fn detection_indices(n_symbols: usize, count: usize) -> Vec<usize> {
    let d = count.clamp(1, n_symbols);
    (0..d).map(|i| i * n_symbols / d).collect()
}

/// Synthesizes all symbols of a scene and returns the gated slow-time matrix.
pub fn simulate(scene: &Scene, params: &ProcessingParams) -> Result<Simulation, PipelineError> {
    let chain = SymbolChain::new(scene, params.range_window)?;
    if scene.doppler_may_alias() {
        log::warn!(
            "blade-tip Doppler up to {:.0} Hz exceeds the unambiguous span of +/-{:.0} Hz",
            scene.max_doppler_bound(),
            0.5 / scene.cfg.symbol_period()
        );
    }
    let m_total = scene.cfg.n_symbols;
    let det_idx = detection_indices(m_total, params.detection_symbols);
    if det_idx.len() < MIN_DETECTION_PROFILES {
        return Err(ReceiverError::TooFewProfiles(det_idx.len()).into());
    }
    let profiles = det_idx.par_iter().map(|&m| chain.profile(m)).collect::<Result<Vec<_>, _>>()?;
    let integrated = integrate_profiles(&profiles)?;
    drop(profiles);
    let gate = match detect_in_power(&integrated, &params.detection) {
        Detection::Target(g) => g,
        Detection::NoTarget => return Err(PipelineError::NoTarget),
    };
    let rows = (0..m_total)
        .into_par_iter()
        .map(|m| chain.profile(m).map(|p| gate.bins.iter().map(|&r| p.bins[r]).collect::<Vec<Complex64>>()))
        .collect::<Result<Vec<_>, _>>()?;
    let data = Array2::from_shape_fn((gate.bins.len(), m_total), |(r, m)| rows[m][r]);
    let stm = SlowTimeMatrix::new(data, gate.bins.clone(), ProfileMeta::from_config(&scene.cfg))?;
    Ok(Simulation { stm, gate, integrated })
}

/// Spectral products and features of one slow-time matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub spectrum: DopplerSpectrum,
    pub spectrogram: Option<Spectrogram>,
    pub range_doppler: RangeDopplerMap,
    pub features: MicroDopplerFeatures,
}

pub fn analyze(stm: &SlowTimeMatrix, params: &ProcessingParams) -> Result<Analysis, PipelineError> {
    let v = stm.gate_sum();
    let t = stm.symbol_period();
    let spectrum = doppler_spectrum(&v, t, params.doppler_window)?;
    let spectrogram = if params.spectrogram_window_len <= v.len() {
        Some(stft_spectrogram(&v, t, params.spectrogram_window_len, params.spectrogram_hop, params.doppler_window)?)
    } else {
        None
    };
    let rdm = range_doppler(stm, params.doppler_window)?;
    let features = extract_features(&spectrum, spectrogram.as_ref(), &v, t, &params.features);
    Ok(Analysis { spectrum, spectrogram, range_doppler: rdm, features })
}

/// Simulation, analysis and decision for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneResult {
    pub simulation: Simulation,
    pub analysis: Analysis,
    pub decision: FlightModeDecision,
}

pub fn run_scene(scene: &Scene, params: &ProcessingParams) -> Result<SceneResult, PipelineError> {
    let simulation = simulate(scene, params)?;
    let analysis = analyze(&simulation.stm, params)?;
    let expected = ExpectedSpread::from_geometry(&scene.geometry, &scene.airframe)?;
    let decision = classify(&analysis.features, &expected, &params.classifier);
    Ok(SceneResult { simulation, analysis, decision })
}
