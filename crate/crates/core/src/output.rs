//! Artifact emission: Doppler-spectrum CSV, grayscale heatmaps with axis
//! sidecars, profile dumps and JSON feature/decision records.
//!
//! Heatmaps map dB to gray as `round(255 * (clamp(dB, -80, 0) + 80) / 80)`:
//! 0 dB is white (255) and anything at or below -80 dB is black (0).

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{classify, ExpectedSpread, FlightModeDecision};
use crate::features::MicroDopplerFeatures;
use crate::pipeline::{analyze, simulate, Analysis, PipelineError, ProcessingParams};
use crate::profile_file::{encode_profile, ProfileFileError};
use crate::receiver::{DopplerSpectrum, RangeDopplerMap, SlowTimeMatrix, Spectrogram};
use crate::scenario::LoadedScenario;

/// Lowest level shown in heatmaps (dB).
pub const HEATMAP_MIN_DB: f64 = -80.0;

/// Exit status for a run that found no target.
pub const EXIT_NO_TARGET: i32 = 2;
pub const EXIT_ERROR: i32 = 1;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("no target detected")]
    NoTarget,
    #[error(transparent)]
    Pipeline(PipelineError),
    #[error(transparent)]
    Profile(#[from] ProfileFileError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("image encoding failed: {0}")]
    Image(String),
    #[error("{0}")]
    Other(String),
}

impl From<PipelineError> for RunError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::NoTarget => RunError::NoTarget,
            e => RunError::Pipeline(e),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::NoTarget => EXIT_NO_TARGET,
            _ => EXIT_ERROR,
        }
    }
}

/// dB to 8-bit gray, monotone, 0 dB -> 255 and <= -80 dB -> 0.
pub fn db_to_gray(db: f64) -> u8 {
    let c = if db.is_nan() { HEATMAP_MIN_DB } else { db.clamp(HEATMAP_MIN_DB, 0.0) };
    (255.0 * (c - HEATMAP_MIN_DB) / -HEATMAP_MIN_DB).round() as u8
}

pub fn spectrum_csv(s: &DopplerSpectrum) -> String {
    let mut out = String::with_capacity(32 * s.len() + 16);
    out.push_str("freq_hz,power_db\n");
    for (f, p) in s.freqs_hz.iter().zip(&s.power_db) {
        out.push_str(&format!("{f},{p}\n"));
    }
    out
}

fn gray_pixels(power_db: &Array2<f64>) -> Vec<u8> {
    power_db.iter().map(|&d| db_to_gray(d)).collect()
}

/// Binary PGM (P5), rows top to bottom.
pub fn heatmap_pgm(power_db: &Array2<f64>) -> Vec<u8> {
    let (h, w) = power_db.dim();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(gray_pixels(power_db));
    out
}

pub fn heatmap_png(power_db: &Array2<f64>) -> Result<Vec<u8>, RunError> {
    let (h, w) = power_db.dim();
    let img = image::GrayImage::from_raw(w as u32, h as u32, gray_pixels(power_db))
        .ok_or_else(|| RunError::Image("pixel buffer size mismatch".into()))?;
    let mut out = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut out), image::ImageFormat::Png)
        .map_err(|e| RunError::Image(e.to_string()))?;
    Ok(out)
}

/// Uniform axis description: value of index i is start + i * step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub label: String,
    pub unit: String,
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

/// Sidecar metadata for a heatmap image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapMeta {
    pub width: usize,
    pub height: usize,
    /// Vertical axis, first row at the top.
    pub rows: Axis,
    pub cols: Axis,
    pub db_min: f64,
    pub db_max: f64,
    pub gray_mapping: String,
    /// Linear power mapped to 0 dB.
    pub reference_power: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_bins: Option<Vec<usize>>,
}

fn axis(label: &str, unit: &str, values: &[f64]) -> Axis {
    let step = if values.len() > 1 { values[1] - values[0] } else { 0.0 };
    Axis { label: label.into(), unit: unit.into(), start: values.first().copied().unwrap_or(0.0), step, count: values.len() }
}

fn heatmap_meta(power_db: &Array2<f64>, rows: Axis, cols: Axis, reference_power: f64) -> HeatmapMeta {
    let (h, w) = power_db.dim();
    HeatmapMeta {
        width: w,
        height: h,
        rows,
        cols,
        db_min: HEATMAP_MIN_DB,
        db_max: 0.0,
        gray_mapping: "gray = round(255 * (clamp(dB, -80, 0) + 80) / 80)".into(),
        reference_power,
        range_bins: None,
    }
}

pub fn spectrogram_meta(sg: &Spectrogram) -> HeatmapMeta {
    heatmap_meta(&sg.power_db, axis("time", "s", &sg.times_s), axis("doppler", "Hz", &sg.freqs_hz), sg.reference_power)
}

pub fn range_doppler_meta(rdm: &RangeDopplerMap) -> HeatmapMeta {
    let mut m =
        heatmap_meta(&rdm.power_db, axis("delay", "s", &rdm.delays_s), axis("doppler", "Hz", &rdm.freqs_hz), rdm.reference_power);
    m.range_bins = Some(rdm.range_bins.clone());
    m
}

/// Which artifacts to write, and where.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub spectrum_csv: bool,
    pub heatmaps: bool,
    pub png: bool,
    pub profile: bool,
    pub features: bool,
    pub decision: bool,
    pub scenario: bool,
}

impl OutputSpec {
    /// Everything except PNG.
    pub fn all(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            spectrum_csv: true,
            heatmaps: true,
            png: false,
            profile: true,
            features: true,
            decision: true,
            scenario: true,
        }
    }

    pub fn none(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            spectrum_csv: false,
            heatmaps: false,
            png: false,
            profile: false,
            features: false,
            decision: false,
            scenario: false,
        }
    }
}

pub const SPECTRUM_CSV: &str = "doppler_spectrum.csv";
pub const SPECTROGRAM_PGM: &str = "spectrogram.pgm";
pub const SPECTROGRAM_PNG: &str = "spectrogram.png";
pub const SPECTROGRAM_META: &str = "spectrogram.json";
pub const RANGE_DOPPLER_PGM: &str = "range_doppler.pgm";
pub const RANGE_DOPPLER_PNG: &str = "range_doppler.png";
pub const RANGE_DOPPLER_META: &str = "range_doppler.json";
pub const PROFILE_FILE: &str = "slow_time.vmdp";
pub const FEATURES_JSON: &str = "features.json";
pub const DECISION_JSON: &str = "decision.json";
pub const SCENARIO_JSON: &str = "scenario.normalized.json";

/// Serialized writer: creates the output directory and records each file.
struct Writer<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(dir: &'a Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.display().to_string(), source })?;
        Ok(Self { dir, written: Vec::new() })
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| RunError::Io { path: path.display().to_string(), source })?;
        self.written.push(path);
        Ok(())
    }

    fn put_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| RunError::Other(e.to_string()))?;
        s.push('\n');
        self.put(name, s.as_bytes())
    }
}

/// Files written by a run together with its main results.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactSet {
    pub files: Vec<PathBuf>,
    pub features: MicroDopplerFeatures,
    pub decision: Option<FlightModeDecision>,
}

/// Writes the requested artifacts of an analyzed slow-time matrix.
/// `expected` enables the decision record.
pub fn write_artifacts(
    stm: &SlowTimeMatrix,
    analysis: &Analysis,
    expected: Option<&ExpectedSpread>,
    params: &ProcessingParams,
    spec: &OutputSpec,
    scenario: Option<&LoadedScenario>,
) -> Result<ArtifactSet, RunError> {
    let mut w = Writer::new(&spec.dir)?;
    if spec.scenario {
        if let Some(s) = scenario {
            w.put(SCENARIO_JSON, s.normalized.to_json().as_bytes())?;
        }
    }
    if spec.profile {
        w.put(PROFILE_FILE, &encode_profile(stm)?)?;
    }
    if spec.spectrum_csv {
        w.put(SPECTRUM_CSV, spectrum_csv(&analysis.spectrum).as_bytes())?;
    }
    if spec.heatmaps {
        if let Some(sg) = &analysis.spectrogram {
            w.put(SPECTROGRAM_PGM, &heatmap_pgm(&sg.power_db))?;
            w.put_json(SPECTROGRAM_META, &spectrogram_meta(sg))?;
            if spec.png {
                w.put(SPECTROGRAM_PNG, &heatmap_png(&sg.power_db)?)?;
            }
        }
        let rdm = &analysis.range_doppler;
        w.put(RANGE_DOPPLER_PGM, &heatmap_pgm(&rdm.power_db))?;
        w.put_json(RANGE_DOPPLER_META, &range_doppler_meta(rdm))?;
        if spec.png {
            w.put(RANGE_DOPPLER_PNG, &heatmap_png(&rdm.power_db)?)?;
        }
    }
    if spec.features {
        w.put_json(FEATURES_JSON, &analysis.features)?;
    }
    let decision = expected.map(|e| classify(&analysis.features, e, &params.classifier));
    if spec.decision {
        if let Some(d) = &decision {
            w.put_json(DECISION_JSON, d)?;
        }
    }
    Ok(ArtifactSet { files: w.written, features: analysis.features.clone(), decision })
}

/// Simulates, processes and classifies a scenario, writing the requested artifacts.
pub fn run_pipeline(scenario: &LoadedScenario, spec: &OutputSpec) -> Result<ArtifactSet, RunError> {
    let params = &scenario.processing;
    let sim = simulate(&scenario.scene, params)?;
    let analysis = analyze(&sim.stm, params)?;
    let expected = ExpectedSpread::from_geometry(&scenario.scene.geometry, &scenario.scene.airframe)
        .map_err(|e| RunError::Pipeline(e.into()))?;
    write_artifacts(&sim.stm, &analysis, Some(&expected), params, spec, Some(scenario))
}
