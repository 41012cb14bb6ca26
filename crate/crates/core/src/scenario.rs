//! Scenario files: a strict JSON document describing geometry, waveform,
//! airframe, flight mode, noise and processing settings.
//!
//! Every block is optional except `mode`; missing values take the default
//! measurement setup (7 GHz carrier, 2.4 GHz bandwidth, 2500/2048 carriers,
//! six lifting rotors plus one thrust rotor). [`ScenarioFile::normalized`]
//! resolves all defaults into explicit values, and a normalized file parses
//! back to the same scene.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airframe::{BodyPose, BodyScatterer, FlightMode, Propeller, VtolAirframe};
use crate::geometry::{BistaticGeometry, Vec3};
use crate::pipeline::ProcessingParams;
use crate::synth::{DelayReference, NoiseSpec, Scene};
use crate::waveform::{
    OfdmConfig, DEFAULT_BANDWIDTH, DEFAULT_CARRIERS, DEFAULT_CENTER_FREQ, DEFAULT_ENERGIZED, DEFAULT_SYMBOLS,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Default receiver SNR per energized bin (dB).
pub const DEFAULT_SNR_DB: f64 = 15.0;
/// Default observation geometry when no positions are given.
pub const DEFAULT_RANGE_M: f64 = 10.0;
pub const DEFAULT_BETA_DEG: f64 = 60.0;
pub const DEFAULT_BISECTOR_AZ_DEG: f64 = 20.0;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("scenario schema violation: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("unsupported schema_version {found}; expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("invalid {field}: {constraint}")]
    Invalid { field: String, constraint: String },
}

fn invalid(field: impl Into<String>, constraint: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { field: field.into(), constraint: constraint.into() }
}

/// Alternative to explicit positions: tx and rx at `range_m` from the target,
/// symmetric about the horizontal bisector azimuth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnglesBlock {
    pub range_m: f64,
    pub beta_deg: f64,
    pub bisector_az_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rx: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<AnglesBlock>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfdmBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_carriers: Option<usize>,
    /// Number of energized carriers, centered on DC.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energized: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pilots: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_hz: Option<f64>,
    /// Defaults to bandwidth * n_carriers / energized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_rate_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_symbols: Option<usize>,
}

fn default_blades() -> usize {
    2
}

fn default_blade_length() -> f64 {
    0.2819
}

fn default_spin_sense() -> i8 {
    1
}

fn default_scatterers() -> usize {
    8
}

fn unit_reflectivity() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropellerSpec {
    pub mount: [f64; 3],
    /// Unit spin axis in the body frame.
    pub axis: [f64; 3],
    #[serde(default = "default_blades")]
    pub blades: usize,
    #[serde(default = "default_blade_length")]
    pub blade_length_m: f64,
    pub rate_hz: f64,
    #[serde(default)]
    pub phase_rad: f64,
    #[serde(default = "default_spin_sense")]
    pub spin_sense: i8,
    #[serde(default = "default_scatterers")]
    pub scatterers_per_blade: usize,
    /// Per-scatterer amplitude as [re, im].
    #[serde(default = "unit_reflectivity")]
    pub reflectivity: [f64; 2],
}

impl PropellerSpec {
    fn from_propeller(p: &Propeller) -> Self {
        Self {
            mount: p.mount.into(),
            axis: p.spin_axis.into(),
            blades: p.blade_count,
            blade_length_m: p.blade_length,
            rate_hz: p.rotation_rate,
            phase_rad: p.initial_phase,
            spin_sense: p.spin_sense,
            scatterers_per_blade: p.scatterers_per_blade,
            reflectivity: [p.blade_reflectivity.re, p.blade_reflectivity.im],
        }
    }

    fn to_propeller(&self) -> Propeller {
        Propeller {
            mount: Vec3::from(self.mount),
            spin_axis: Vec3::from(self.axis),
            blade_count: self.blades,
            blade_length: self.blade_length_m,
            rotation_rate: self.rate_hz,
            initial_phase: self.phase_rad,
            spin_sense: self.spin_sense,
            scatterers_per_blade: self.scatterers_per_blade,
            blade_reflectivity: Complex64::new(self.reflectivity[0], self.reflectivity[1]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySpec {
    pub pos: [f64; 3],
    #[serde(default = "unit_reflectivity")]
    pub reflectivity: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    #[serde(default)]
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw_rad: f64,
    #[serde(default)]
    pub pitch_rad: f64,
    #[serde(default)]
    pub roll_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AirframeBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lifting: Option<Vec<PropellerSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thrust: Option<Vec<PropellerSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<Vec<BodySpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<PoseSpec>,
}

fn default_version() -> u32 {
    SCHEMA_VERSION
}

fn default_snr() -> Option<f64> {
    Some(DEFAULT_SNR_DB)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default = "default_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub geometry: GeometryBlock,
    #[serde(default)]
    pub ofdm: OfdmBlock,
    #[serde(default)]
    pub airframe: AirframeBlock,
    pub mode: FlightMode,
    /// Receiver SNR (dB); null for a noiseless scene.
    #[serde(default = "default_snr")]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub noise_seed: u64,
    #[serde(default)]
    pub delay_reference: DelayReference,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direct_path_gain: Option<f64>,
    #[serde(default)]
    pub processing: ProcessingParams,
}

/// A parsed scenario: the scene, its processing settings and the normalized file.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub scene: Scene,
    pub processing: ProcessingParams,
    pub normalized: ScenarioFile,
}

fn finite3(field: &str, v: &[f64; 3]) -> Result<(), ScenarioError> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(invalid(field, "components must be finite"))
    }
}

fn check_propeller(field: &str, p: &PropellerSpec) -> Result<(), ScenarioError> {
    finite3(&format!("{field}.mount"), &p.mount)?;
    let norm = Vec3::from(p.axis).norm();
    if !((norm - 1.0).abs() <= 1e-9) {
        return Err(invalid(format!("{field}.axis"), "must be a unit vector (norm 1 within 1e-9)"));
    }
    if p.blades < 1 {
        return Err(invalid(format!("{field}.blades"), "must be >= 1"));
    }
    if !(p.blade_length_m > 0.0 && p.blade_length_m.is_finite()) {
        return Err(invalid(format!("{field}.blade_length_m"), "must be > 0"));
    }
    if !(p.rate_hz >= 0.0 && p.rate_hz.is_finite()) {
        return Err(invalid(format!("{field}.rate_hz"), "must be >= 0"));
    }
    if !p.phase_rad.is_finite() {
        return Err(invalid(format!("{field}.phase_rad"), "must be finite"));
    }
    if p.spin_sense != 1 && p.spin_sense != -1 {
        return Err(invalid(format!("{field}.spin_sense"), "must be +1 or -1"));
    }
    if p.scatterers_per_blade < 1 {
        return Err(invalid(format!("{field}.scatterers_per_blade"), "must be >= 1"));
    }
    if !p.reflectivity.iter().all(|c| c.is_finite()) {
        return Err(invalid(format!("{field}.reflectivity"), "must be finite"));
    }
    Ok(())
}

impl ScenarioFile {
    /// A scenario for `mode` with every other value defaulted.
    pub fn minimal(mode: FlightMode) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            geometry: GeometryBlock::default(),
            ofdm: OfdmBlock::default(),
            airframe: AirframeBlock::default(),
            mode,
            snr_db: default_snr(),
            noise_seed: 0,
            delay_reference: DelayReference::default(),
            direct_path_gain: None,
            processing: ProcessingParams::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let file: Self = serde_json::from_str(text)?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::Version { found: file.schema_version, expected: SCHEMA_VERSION });
        }
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    /// Resolves all defaults into explicit values and validates ranges.
    pub fn normalized(&self) -> Result<Self, ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::Version { found: self.schema_version, expected: SCHEMA_VERSION });
        }
        let g = &self.geometry;
        let carrier = g.carrier_hz.unwrap_or(DEFAULT_CENTER_FREQ);
        if !(carrier > 0.0 && carrier.is_finite()) {
            return Err(invalid("geometry.carrier_hz", "must be > 0"));
        }
        let target = g.target.unwrap_or([0.0; 3]);
        finite3("geometry.target", &target)?;
        let (tx, rx) = match (g.tx, g.rx, g.angles) {
            (Some(tx), Some(rx), None) => (tx, rx),
            (None, None, angles) => {
                let a = angles.unwrap_or(AnglesBlock {
                    range_m: DEFAULT_RANGE_M,
                    beta_deg: DEFAULT_BETA_DEG,
                    bisector_az_deg: DEFAULT_BISECTOR_AZ_DEG,
                });
                if !(a.range_m > 0.0 && a.range_m.is_finite()) {
                    return Err(invalid("geometry.angles.range_m", "must be > 0"));
                }
                if !(a.beta_deg >= 0.0 && a.beta_deg <= 180.0) {
                    return Err(invalid("geometry.angles.beta_deg", "must lie in [0, 180]"));
                }
                if !a.bisector_az_deg.is_finite() {
                    return Err(invalid("geometry.angles.bisector_az_deg", "must be finite"));
                }
                let geom = BistaticGeometry::from_angles(
                    a.range_m,
                    a.beta_deg.to_radians(),
                    a.bisector_az_deg.to_radians(),
                    Vec3::from(target),
                    carrier,
                )
                .map_err(|e| invalid("geometry.angles", e.to_string()))?;
                (geom.tx().into(), geom.rx().into())
            }
            (_, _, Some(_)) => return Err(invalid("geometry", "give either tx/rx positions or angles, not both")),
            _ => return Err(invalid("geometry", "tx and rx must be given together")),
        };
        finite3("geometry.tx", &tx)?;
        finite3("geometry.rx", &rx)?;
        BistaticGeometry::new(Vec3::from(tx), Vec3::from(rx), Vec3::from(target), carrier)
            .map_err(|e| invalid("geometry", e.to_string()))?;

        let o = &self.ofdm;
        let n = o.n_carriers.unwrap_or(DEFAULT_CARRIERS);
        let k = o.energized.unwrap_or(DEFAULT_ENERGIZED);
        if n < 1 {
            return Err(invalid("ofdm.n_carriers", "must be >= 1"));
        }
        if k < 1 || k > n {
            return Err(invalid("ofdm.energized", "must lie in [1, n_carriers]"));
        }
        let bandwidth = o.bandwidth_hz.unwrap_or(DEFAULT_BANDWIDTH);
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(invalid("ofdm.bandwidth_hz", "must be > 0"));
        }
        let sample_rate = o.sample_rate_hz.unwrap_or(bandwidth * n as f64 / k as f64);
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(invalid("ofdm.sample_rate_hz", "must be > 0"));
        }
        let n_symbols = o.n_symbols.unwrap_or(DEFAULT_SYMBOLS);
        if n_symbols < 2 {
            return Err(invalid("ofdm.n_symbols", "must be >= 2"));
        }
        let pilots = o.pilots.clone().unwrap_or_default();
        let cfg = OfdmConfig::centered(n, k, bandwidth, carrier, n_symbols);
        if let Some(p) = pilots.iter().find(|p| !cfg.energized.contains(p)) {
            return Err(invalid("ofdm.pilots", format!("index {p} is not an energized carrier")));
        }

        let canon = VtolAirframe::canonical();
        let a = &self.airframe;
        let lifting =
            a.lifting.clone().unwrap_or_else(|| canon.lifting_props.iter().map(PropellerSpec::from_propeller).collect());
        let thrust =
            a.thrust.clone().unwrap_or_else(|| canon.thrust_props.iter().map(PropellerSpec::from_propeller).collect());
        let body = a.body.clone().unwrap_or_else(|| {
            canon
                .body_scatterers
                .iter()
                .map(|b| BodySpec { pos: b.pos.into(), reflectivity: [b.reflectivity.re, b.reflectivity.im] })
                .collect()
        });
        let pose = a.pose.unwrap_or_default();
        for (i, p) in lifting.iter().enumerate() {
            check_propeller(&format!("airframe.lifting[{i}]"), p)?;
        }
        for (i, p) in thrust.iter().enumerate() {
            check_propeller(&format!("airframe.thrust[{i}]"), p)?;
        }
        for (i, b) in body.iter().enumerate() {
            finite3(&format!("airframe.body[{i}].pos"), &b.pos)?;
            if !b.reflectivity.iter().all(|c| c.is_finite()) {
                return Err(invalid(format!("airframe.body[{i}].reflectivity"), "must be finite"));
            }
        }
        finite3("airframe.pose.position", &pose.position)?;
        if ![pose.yaw_rad, pose.pitch_rad, pose.roll_rad].iter().all(|v| v.is_finite()) {
            return Err(invalid("airframe.pose", "angles must be finite"));
        }

        if let Some(s) = self.snr_db {
            if !s.is_finite() {
                return Err(invalid("snr_db", "must be finite or null"));
            }
        }
        if let Some(gain) = self.direct_path_gain {
            if !(gain >= 0.0 && gain.is_finite()) {
                return Err(invalid("direct_path_gain", "must be >= 0"));
            }
        }
        check_processing(&self.processing)?;

        let out = Self {
            schema_version: SCHEMA_VERSION,
            geometry: GeometryBlock {
                tx: Some(tx),
                rx: Some(rx),
                target: Some(target),
                carrier_hz: Some(carrier),
                angles: None,
            },
            ofdm: OfdmBlock {
                n_carriers: Some(n),
                energized: Some(k),
                pilots: Some(pilots),
                bandwidth_hz: Some(bandwidth),
                sample_rate_hz: Some(sample_rate),
                n_symbols: Some(n_symbols),
            },
            airframe: AirframeBlock { lifting: Some(lifting), thrust: Some(thrust), body: Some(body), pose: Some(pose) },
            ..self.clone()
        };
        // Cross-propeller constraints live on the airframe itself.
        out.build_airframe().validate().map_err(|e| invalid("airframe", e.to_string()))?;
        Ok(out)
    }

    fn build_airframe(&self) -> VtolAirframe {
        let a = &self.airframe;
        let pose = a.pose.unwrap_or_default();
        VtolAirframe {
            body_scatterers: a
                .body
                .iter()
                .flatten()
                .map(|b| BodyScatterer {
                    pos: Vec3::from(b.pos),
                    reflectivity: Complex64::new(b.reflectivity[0], b.reflectivity[1]),
                })
                .collect(),
            lifting_props: a.lifting.iter().flatten().map(PropellerSpec::to_propeller).collect(),
            thrust_props: a.thrust.iter().flatten().map(PropellerSpec::to_propeller).collect(),
            body_pose: BodyPose {
                position: Vec3::from(pose.position),
                yaw: pose.yaw_rad,
                pitch: pose.pitch_rad,
                roll: pose.roll_rad,
            },
        }
    }

    /// Normalizes and builds the scene and processing settings.
    pub fn load(&self) -> Result<LoadedScenario, ScenarioError> {
        let f = self.normalized()?;
        let g = &f.geometry;
        let geometry = BistaticGeometry::new(
            Vec3::from(g.tx.expect("normalized")),
            Vec3::from(g.rx.expect("normalized")),
            Vec3::from(g.target.expect("normalized")),
            g.carrier_hz.expect("normalized"),
        )
        .map_err(|e| invalid("geometry", e.to_string()))?;
        let o = &f.ofdm;
        let mut cfg = OfdmConfig::centered(
            o.n_carriers.expect("normalized"),
            o.energized.expect("normalized"),
            o.bandwidth_hz.expect("normalized"),
            geometry.carrier_freq(),
            o.n_symbols.expect("normalized"),
        );
        cfg.sample_rate = o.sample_rate_hz.expect("normalized");
        cfg.pilots = o.pilots.clone().expect("normalized");
        let mut scene = Scene::new(geometry, f.build_airframe(), f.mode, cfg);
        scene.noise = f.snr_db.map_or(NoiseSpec::Noiseless, NoiseSpec::SnrDb);
        scene.noise_seed = f.noise_seed;
        scene.delay_reference = f.delay_reference;
        scene.direct_path_gain = f.direct_path_gain;
        scene.validate().map_err(|e| invalid("scene", e.to_string()))?;
        Ok(LoadedScenario { scene, processing: f.processing, normalized: f })
    }
}

fn check_processing(p: &ProcessingParams) -> Result<(), ScenarioError> {
    if !p.detection.threshold_db.is_finite() {
        return Err(invalid("processing.detection.threshold_db", "must be finite"));
    }
    if p.detection_symbols < 1 {
        return Err(invalid("processing.detection_symbols", "must be >= 1"));
    }
    if p.spectrogram_window_len < 2 {
        return Err(invalid("processing.spectrogram_window_len", "must be >= 2"));
    }
    if p.spectrogram_hop < 1 {
        return Err(invalid("processing.spectrogram_hop", "must be >= 1"));
    }
    let s = &p.features.spread;
    if !(s.floor_margin_db.is_finite() && s.floor_margin_db > 0.0) {
        return Err(invalid("processing.features.spread.floor_margin_db", "must be > 0"));
    }
    if p.features.n_blades < 1 {
        return Err(invalid("processing.features.n_blades", "must be >= 1"));
    }
    Ok(())
}

/// Reads, validates and normalizes a scenario file.
pub fn parse_scenario(path: &Path) -> Result<LoadedScenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    ScenarioFile::from_json(&text)?.load()
}
