//! Rule-based flight-mode classification from Doppler-spread components,
//! with spread thresholds scaled to the observation geometry.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airframe::{FlightMode, Propeller, VtolAirframe};
use crate::features::{predict_doppler_spread, DopplerComponent, FeatureError, MicroDopplerFeatures};
use crate::geometry::{bistatic_angle, elevation_angle, BistaticGeometry, GeometryError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifierError {
    #[error("airframe has no {0} propeller to predict a spread from")]
    MissingPropeller(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Predicted spreads of the lifting and thrust rotors at the observation geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedSpread {
    pub lifting_hz: f64,
    pub thrust_hz: f64,
}

fn rotor_spread(geom: &BistaticGeometry, airframe: &VtolAirframe, props: &[Propeller]) -> Result<f64, ClassifierError> {
    let mut best = 0.0f64;
    for p in props {
        let hub = airframe.world_mount(p);
        let beta = bistatic_angle(geom, &hub)?;
        let theta = match elevation_angle(&airframe.world_axis(p), geom, &hub) {
            Ok(t) => t,
            // Exact forward scatter: cos(beta/2) = 0 nulls the spread for any theta.
            Err(GeometryError::ForwardScatter) => std::f64::consts::FRAC_PI_2,
            Err(e) => return Err(e.into()),
        };
        let b = predict_doppler_spread(p.rotation_rate, p.blade_length, beta, theta, geom.wavelength())?;
        best = best.max(b.abs());
    }
    Ok(best)
}

impl ExpectedSpread {
    /// Largest predicted spread within each rotor group, evaluated at each hub.
    pub fn from_geometry(geom: &BistaticGeometry, airframe: &VtolAirframe) -> Result<Self, ClassifierError> {
        if airframe.lifting_props.is_empty() {
            return Err(ClassifierError::MissingPropeller("lifting"));
        }
        if airframe.thrust_props.is_empty() {
            return Err(ClassifierError::MissingPropeller("thrust"));
        }
        Ok(Self {
            lifting_hz: rotor_spread(geom, airframe, &airframe.lifting_props)?,
            thrust_hz: rotor_spread(geom, airframe, &airframe.thrust_props)?,
        })
    }

    /// Wide/narrow boundary: geometric mean of the two predictions.
    pub fn split_hz(&self) -> f64 {
        (self.lifting_hz * self.thrust_hz).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierParams {
    /// A lone narrow component must peak within this many dB of the spectrum maximum.
    pub narrow_peak_window_db: f64,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        Self { narrow_peak_window_db: 6.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiredRule {
    pub name: String,
    /// Distance of the evidence past the threshold, in the threshold's units.
    pub margin: f64,
    pub threshold: f64,
}

impl FiredRule {
    fn score(&self) -> f64 {
        if self.threshold > 0.0 {
            self.margin / self.threshold
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightModeDecision {
    /// None when no rule set matched.
    pub mode: Option<FlightMode>,
    pub confidence: f64,
    pub fired_rules: Vec<FiredRule>,
    pub expected: ExpectedSpread,
    pub evidence: MicroDopplerFeatures,
}

impl FlightModeDecision {
    pub fn label(&self) -> String {
        self.mode.map_or_else(|| "Unknown".to_string(), |m| m.to_string())
    }
}

fn wide_rule(c: &DopplerComponent, split: f64) -> FiredRule {
    FiredRule { name: "wide_component".into(), margin: c.spread_hz - split, threshold: split }
}

fn narrow_rule(c: &DopplerComponent, split: f64) -> FiredRule {
    FiredRule { name: "narrow_component".into(), margin: split - c.spread_hz, threshold: split }
}

/// Maps spread components to a flight mode:
/// wide only -> VerticalFlight, wide and narrow -> Transition,
/// strong narrow only -> Cruise, anything else -> unknown.
pub fn classify(features: &MicroDopplerFeatures, expected: &ExpectedSpread, params: &ClassifierParams) -> FlightModeDecision {
    let split = expected.split_hz();
    let widest_wide = features.components.iter().filter(|c| c.spread_hz >= split).max_by(|a, b| a.spread_hz.total_cmp(&b.spread_hz));
    let narrowest = features.components.iter().filter(|c| c.spread_hz < split).min_by(|a, b| a.spread_hz.total_cmp(&b.spread_hz));
    let strongest_narrow = features
        .components
        .iter()
        .filter(|c| c.spread_hz < split)
        .max_by(|a, b| a.peak_db.total_cmp(&b.peak_db));

    let (mode, fired) = match (widest_wide, narrowest) {
        (Some(w), None) => (Some(FlightMode::VerticalFlight), vec![wide_rule(w, split)]),
        (Some(w), Some(n)) => (Some(FlightMode::Transition), vec![wide_rule(w, split), narrow_rule(n, split)]),
        (None, Some(_)) => {
            let n = strongest_narrow.expect("a narrow component exists");
            let below_max = features.max_power_db - n.peak_db;
            if below_max <= params.narrow_peak_window_db {
                let peak = FiredRule {
                    name: "narrow_peak_near_max".into(),
                    margin: params.narrow_peak_window_db - below_max,
                    threshold: params.narrow_peak_window_db,
                };
                (Some(FlightMode::Cruise), vec![narrow_rule(n, split), peak])
            } else {
                (None, Vec::new())
            }
        }
        (None, None) => (None, Vec::new()),
    };
    let confidence = if mode.is_some() {
        fired.iter().map(FiredRule::score).fold(f64::INFINITY, f64::min).clamp(0.0, 1.0)
    } else {
        0.0
    };
    FlightModeDecision { mode, confidence, fired_rules: fired, expected: *expected, evidence: features.clone() }
}
