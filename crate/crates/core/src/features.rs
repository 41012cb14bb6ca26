//! Micro-Doppler features: predicted spread of a rotor, comb spacing,
//! Doppler-spread components, slow-time period and rotation rate.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::receiver::{median, DopplerSpectrum, Spectrogram, Window, MIN_DB};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("no comb detected")]
    NoComb,
    #[error("aperiodic signal")]
    Aperiodic,
}

/// Doppler spread of a rotor: 4 omega L cos(beta/2) sin(theta) / lambda,
/// with omega = 2 pi f_rot.
pub fn predict_doppler_spread(f_rot: f64, blade_length: f64, beta: f64, theta: f64, lambda: f64) -> Result<f64, FeatureError> {
    if !(lambda > 0.0) {
        return Err(FeatureError::Domain("wavelength must be > 0"));
    }
    if !(blade_length > 0.0) {
        return Err(FeatureError::Domain("blade length must be > 0"));
    }
    if ![f_rot, blade_length, beta, theta, lambda].iter().all(|x| x.is_finite()) {
        return Err(FeatureError::Domain("inputs must be finite"));
    }
    Ok(4.0 * TAU * f_rot * blade_length * (beta / 2.0).cos() * theta.sin() / lambda)
}

/// f_rot = spacing / n_blades.
pub fn estimate_rotation_rate(spacing_hz: f64, n_blades: usize) -> Result<f64, FeatureError> {
    if n_blades == 0 {
        return Err(FeatureError::Domain("n_blades must be >= 1"));
    }
    if !(spacing_hz > 0.0) {
        return Err(FeatureError::Domain("spacing must be > 0"));
    }
    Ok(spacing_hz / n_blades as f64)
}

/// Tunables for comb, spread and component estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpreadParams {
    /// Support threshold above the median floor (dB).
    pub floor_margin_db: f64,
    /// Half-width of the zero-Doppler exclusion zone (bins).
    pub zero_zone_bins: usize,
    /// Refined edge: outermost bin within this many dB of the outer lobe peak.
    pub edge_drop_db: f64,
    /// A dip this deep below the running maximum ends the inward edge walk (dB).
    pub lobe_dip_db: f64,
    /// Inward edge walk limit as a fraction of the half-width of zero-centered supports.
    pub max_edge_walk: f64,
    /// A support must peak at least this far above its threshold (dB).
    pub noise_guard_db: f64,
    /// Minimum inner/outer level step that reveals a nested narrow component (dB).
    pub nested_step_db: f64,
    /// Inner half-width search range as fractions of the parent half-width.
    pub nested_min_frac: f64,
    pub nested_max_frac: f64,
    /// Energy smoothing length for nested detection, in comb spacings.
    pub nested_smoothing_spacings: f64,
    /// Nested components within this relative spread of their parent are dropped.
    pub duplicate_ratio: f64,
    /// Comb level required for spacing estimation, above the floor (dB).
    pub comb_floor_db: f64,
    /// Moving-average length removed from the dB spectrum before comb search (bins, odd).
    pub comb_detrend_bins: usize,
}

impl Default for SpreadParams {
    fn default() -> Self {
        Self {
            floor_margin_db: 10.0,
            zero_zone_bins: 2,
            edge_drop_db: 4.0,
            lobe_dip_db: 1.0,
            max_edge_walk: 0.3,
            noise_guard_db: 3.0,
            nested_step_db: 13.0,
            nested_min_frac: 0.25,
            nested_max_frac: 0.7,
            nested_smoothing_spacings: 4.0,
            duplicate_ratio: 0.15,
            comb_floor_db: 6.0,
            comb_detrend_bins: 33,
        }
    }
}

/// One Doppler-spread component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DopplerComponent {
    pub spread_hz: f64,
    pub center_hz: f64,
    /// Strongest bin outside the zero-Doppler zone, dB relative to the spectrum maximum.
    pub peak_db: f64,
    pub lo_hz: f64,
    pub hi_hz: f64,
    /// Level step to the surrounding component when nested inside a wider one (dB).
    pub nested_contrast_db: Option<f64>,
}

fn in_zone(i: usize, z: usize, zone: usize) -> bool {
    i.abs_diff(z) <= zone
}

fn max_filter(x: &[f64], h: usize) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h + 1).min(n);
            x[lo..hi].iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Centered moving average with a window of `w` (odd) samples, shrinking at the ends.
fn moving_average(x: &[f64], w: usize) -> Vec<f64> {
    let n = x.len();
    let h = w / 2;
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + x[i];
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

fn lin_to_db(p: f64) -> f64 {
    if p > 0.0 {
        (10.0 * p.log10()).max(MIN_DB)
    } else {
        MIN_DB
    }
}

/// Local maxima above `floor + over_floor_db` outside the zero-Doppler zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub freq_hz: f64,
    pub power_db: f64,
    pub index: usize,
}

pub fn find_spikes(spectrum: &DopplerSpectrum, over_floor_db: f64, zero_zone_bins: usize) -> Vec<Spike> {
    let db = &spectrum.power_db;
    let z = spectrum.zero_index();
    let thr = median(db) + over_floor_db;
    (1..db.len().saturating_sub(1))
        .filter(|&i| !in_zone(i, z, zero_zone_bins))
        .filter(|&i| db[i] > thr && db[i] >= db[i - 1] && db[i] > db[i + 1])
        .map(|i| Spike { freq_hz: spectrum.freqs_hz[i], power_db: db[i], index: i })
        .collect()
}

/// Comb spacing from the median gap between adjacent spikes on each side of 0 Hz.
pub fn estimate_spike_spacing_peaks(spectrum: &DopplerSpectrum, params: &SpreadParams) -> Result<f64, FeatureError> {
    let spikes = find_spikes(spectrum, params.comb_floor_db, params.zero_zone_bins);
    let mut gaps = Vec::new();
    for side in [-1.0, 1.0] {
        let mut f: Vec<f64> = spikes.iter().map(|s| s.freq_hz * side).filter(|&f| f > 0.0).collect();
        f.sort_by(|a, b| a.total_cmp(b));
        gaps.extend(f.windows(2).map(|w| w[1] - w[0]));
    }
    if gaps.is_empty() {
        return Err(FeatureError::NoComb);
    }
    Ok(median(&gaps))
}

/// Linear autocorrelation for lags 0..max_lag via zero-padded FFT.
fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let l = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(l, Complex64::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(l).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex64::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(l).process(&mut buf);
    buf.iter().take(max_lag.min(n - 1) + 1).map(|c| c.re / l as f64).collect()
}

/// Vertex offset in (-0.5, 0.5) of the parabola through three samples.
fn parabolic_offset(a: f64, b: f64, c: f64) -> f64 {
    let d = a - 2.0 * b + c;
    if d.abs() < 1e-300 {
        0.0
    } else {
        (0.5 * (a - c) / d).clamp(-0.5, 0.5)
    }
}

/// Minimum normalized spectral autocorrelation that counts as a comb.
const COMB_MIN_CORRELATION: f64 = 0.3;
/// Minimum rise of the comb peak above the central-lobe minimum.
const COMB_MIN_PROMINENCE: f64 = 0.1;

/// Dominant comb spacing from the spectral autocorrelation of the
/// above-floor part of the spectrum, refined over the comb harmonics.
pub fn estimate_spike_spacing(spectrum: &DopplerSpectrum, params: &SpreadParams) -> Result<f64, FeatureError> {
    let db = &spectrum.power_db;
    let m = db.len();
    if m < 8 {
        return Err(FeatureError::NoComb);
    }
    let z = spectrum.zero_index();
    let thr = median(db) + params.comb_floor_db;
    // Detrended level on the above-floor support: the spread envelope is
    // removed so the autocorrelation follows the comb ripple.
    let clipped: Vec<f64> = db.iter().map(|&v| v.max(thr)).collect();
    let trend = moving_average(&clipped, params.comb_detrend_bins.max(3) | 1);
    let support = |i: usize| !in_zone(i, z, params.zero_zone_bins) && db[i] > thr;
    let s: Vec<f64> = (0..m).map(|i| if support(i) { db[i] - trend[i] } else { 0.0 }).collect();
    if (0..m).filter(|&i| support(i)).count() < 2 {
        return Err(FeatureError::NoComb);
    }
    let max_lag = m / 4;
    let r = autocorrelation(&s, max_lag);
    if !(r[0] > 0.0) {
        return Err(FeatureError::NoComb);
    }
    let rho: Vec<f64> = r.iter().map(|v| v / r[0]).collect();
    // Skip the central lobe: the first local minimum bounds it.
    let mut min_lag = 1;
    while min_lag + 2 < rho.len() && rho[min_lag + 1] < rho[min_lag] {
        min_lag += 1;
    }
    let min_lag = min_lag.max(2);
    let search = min_lag..rho.len().saturating_sub(1);
    let peak_max = search.clone().map(|l| rho[l]).fold(f64::NEG_INFINITY, f64::max);
    if !(peak_max >= COMB_MIN_CORRELATION) {
        return Err(FeatureError::NoComb);
    }
    let is_peak = |l: usize| rho[l] >= rho[l - 1] && rho[l] >= rho[l + 1];
    let first = search
        .clone()
        .find(|&l| is_peak(l) && rho[l] >= 0.5 * peak_max && rho[l] - rho[min_lag] >= COMB_MIN_PROMINENCE)
        .ok_or(FeatureError::NoComb)?;
    let coarse = first as f64 + parabolic_offset(rho[first - 1], rho[first], rho[first + 1]);

    // Refine on harmonics of the coarse lag: least squares through the origin.
    let (mut num, mut den) = (0.0, 0.0);
    let mut k = 1usize;
    loop {
        let target = coarse * k as f64;
        let radius = (coarse / 3.0).max(1.0);
        let lo = ((target - radius).floor().max(1.0)) as usize;
        let hi = (target + radius).ceil() as usize;
        if hi + 1 >= rho.len() || k > 64 {
            break;
        }
        let l = (lo..=hi).max_by(|&a, &b| rho[a].total_cmp(&rho[b])).unwrap_or(lo);
        if is_peak(l) && rho[l] >= 0.25 * rho[first] {
            let p = l as f64 + parabolic_offset(rho[l - 1], rho[l], rho[l + 1]);
            num += k as f64 * p;
            den += (k * k) as f64;
        } else if k > 1 {
            break;
        }
        k += 1;
    }
    let lag = if den > 0.0 { num / den } else { coarse };
    Ok(lag * spectrum.bin_hz)
}

/// Normalized autocorrelation of the mean-removed magnitude, computed on a
/// Hann-tapered copy and divided by the taper's own autocorrelation. This
/// removes the truncation ripple that biases peak lags of a plain estimate.
fn magnitude_autocorrelation(mag: &[f64]) -> Option<Vec<f64>> {
    let n = mag.len();
    if n < 4 {
        return None;
    }
    let mean = mag.iter().sum::<f64>() / n as f64;
    let w = Window::Hann.coefficients(n);
    let a: Vec<f64> = mag.iter().zip(&w).map(|(v, w)| (v - mean) * w).collect();
    let r = autocorrelation(&a, n / 2);
    let rw = autocorrelation(&w, n / 2);
    // A numerically constant magnitude has no period.
    if !(r[0] > 1e-24 * (mean * mean * rw[0]).max(1e-300)) {
        return None;
    }
    Some(r.iter().zip(&rw).map(|(v, q)| (v / q) / (r[0] / rw[0])).collect())
}

/// Lag (in samples, fractional) of the maximum of the first excursion of the
/// autocorrelation above 0.5 after the central lobe.
fn first_period_lag(rho: &[f64]) -> Option<f64> {
    let mut l = 1;
    while l + 1 < rho.len() && rho[l] >= 0.5 {
        l += 1;
    }
    let start = (l..rho.len()).find(|&i| rho[i] >= 0.5)?;
    let end = (start..rho.len()).find(|&i| rho[i] < 0.5)?;
    let i = (start..end).max_by(|&a, &b| rho[a].total_cmp(&rho[b]))?;
    if i == 0 || i + 1 >= rho.len() {
        return None;
    }
    Some(i as f64 + parabolic_offset(rho[i - 1], rho[i], rho[i + 1]))
}

/// Slow-time period from the magnitude autocorrelation of `v`.
pub fn estimate_period(v: &[Complex64], symbol_period: f64) -> Result<f64, FeatureError> {
    let mag: Vec<f64> = v.iter().map(|c| c.norm()).collect();
    let rho = magnitude_autocorrelation(&mag).ok_or(FeatureError::Aperiodic)?;
    first_period_lag(&rho).map(|l| l * symbol_period).ok_or(FeatureError::Aperiodic)
}

/// Period of the frame energy outside the 0 Hz column of a spectrogram.
pub fn spectrogram_period(sg: &Spectrogram) -> Result<f64, FeatureError> {
    let zero_col = sg.window_len / 2;
    let energy: Vec<f64> = sg
        .power_db
        .rows()
        .into_iter()
        .map(|r| r.iter().enumerate().filter(|(i, _)| *i != zero_col).map(|(_, d)| 10f64.powf(d / 10.0)).sum())
        .collect();
    let rho = magnitude_autocorrelation(&energy).ok_or(FeatureError::Aperiodic)?;
    first_period_lag(&rho).map(|l| l * sg.hop as f64 * sg.symbol_period).ok_or(FeatureError::Aperiodic)
}

/// Inward walk from a support edge to the turning point of the outermost lobe.
/// `dir` is +1 when walking toward higher indices. Returns the refined edge.
fn refine_edge(env: &[f64], edge: usize, dir: i64, limit: usize, params: &SpreadParams) -> usize {
    let mut best = edge;
    let mut i = edge;
    let mut steps = 0;
    while steps < limit {
        let j = (i as i64 + dir) as usize;
        if env[j] >= env[best] {
            best = j;
        } else if env[best] - env[j] > params.lobe_dip_db {
            break;
        }
        i = j;
        steps += 1;
    }
    let mut k = edge;
    while k != best && env[k] < env[best] - params.edge_drop_db {
        k = (k as i64 + dir) as usize;
    }
    k
}

/// Doppler-spread components: supports above floor + margin (the zero-Doppler
/// zone bridged), edges refined to the outermost lobe, plus narrow components
/// nested inside a zero-centered support when the envelope shows a level step.
pub fn estimate_doppler_spread(
    spectrum: &DopplerSpectrum,
    comb_spacing_hz: Option<f64>,
    params: &SpreadParams,
) -> Vec<DopplerComponent> {
    let db = &spectrum.power_db;
    let m = db.len();
    if m < 2 * params.zero_zone_bins + 5 {
        return Vec::new();
    }
    let z = spectrum.zero_index();
    let zone = params.zero_zone_bins;
    let df = spectrum.bin_hz;
    let f = &spectrum.freqs_hz;
    let floor = median(db);
    let thr = floor + params.floor_margin_db;
    let spacing_bins = comb_spacing_hz.map_or(1.0, |s| (s / df).max(1.0));
    let h = ((spacing_bins / 2.0).ceil() as usize).max(1);

    let masked: Vec<f64> = (0..m).map(|i| if in_zone(i, z, zone) { f64::NEG_INFINITY } else { db[i] }).collect();
    let env = max_filter(&masked, h);
    let mut above: Vec<bool> = env.iter().map(|&e| e > thr).collect();
    let zlo = z.saturating_sub(zone);
    let zhi = (z + zone).min(m - 1);
    let bridge = (zlo > 0 && above[zlo - 1]) || (zhi + 1 < m && above[zhi + 1]);
    for a in &mut above[zlo..=zhi] {
        *a = bridge;
    }

    let mut comps = Vec::new();
    let mut i = 0;
    while i < m {
        if !above[i] {
            i += 1;
            continue;
        }
        let lo = i;
        while i < m && above[i] {
            i += 1;
        }
        let hi = i - 1;
        let raw: Vec<usize> = (lo..=hi).filter(|&k| !in_zone(k, z, zone) && db[k] > thr).collect();
        let peak_raw = raw.iter().map(|&k| db[k]).fold(f64::NEG_INFINITY, f64::max);
        if raw.len() < 2 || peak_raw < thr + params.noise_guard_db {
            continue;
        }
        // Undo the envelope dilation: outermost raw bins above threshold.
        let (lo, hi) = (lo.max(raw[0]), hi.min(raw[raw.len() - 1]));
        let centered = lo <= z && z <= hi;
        let (rlo, rhi) = if centered {
            let cap = |d: usize| ((params.max_edge_walk * d as f64) as usize).min(d.saturating_sub(zone + 1));
            (refine_edge(&env, lo, 1, cap(z - lo), params), refine_edge(&env, hi, -1, cap(hi - z), params))
        } else {
            // Off-zero runs: outermost bins within the edge drop of the run peak.
            let level = peak_raw - params.edge_drop_db;
            let a = (lo..=hi).find(|&k| db[k] >= level).unwrap_or(lo);
            let b = (lo..=hi).rev().find(|&k| db[k] >= level).unwrap_or(hi);
            (a, b)
        };
        let peak = (rlo..=rhi).filter(|&k| !in_zone(k, z, zone)).map(|k| db[k]).fold(f64::NEG_INFINITY, f64::max);
        let parent = DopplerComponent {
            spread_hz: f[rhi] - f[rlo],
            center_hz: 0.5 * (f[rhi] + f[rlo]),
            peak_db: peak,
            lo_hz: f[rlo],
            hi_hz: f[rhi],
            nested_contrast_db: None,
        };
        comps.push(parent);
        if centered {
            if let Some(n) = nested_component(spectrum, rlo, rhi, spacing_bins, params) {
                if n.spread_hz < (1.0 - params.duplicate_ratio) * parent.spread_hz {
                    comps.push(n);
                }
            }
        }
    }
    comps.sort_by(|a, b| b.spread_hz.total_cmp(&a.spread_hz));
    comps
}

/// Largest inner-minus-outer median level step of the smoothed envelope of a
/// zero-centered support, and the inner component it delimits.
fn nested_component(
    spectrum: &DopplerSpectrum,
    rlo: usize,
    rhi: usize,
    spacing_bins: f64,
    params: &SpreadParams,
) -> Option<DopplerComponent> {
    let db = &spectrum.power_db;
    let f = &spectrum.freqs_hz;
    let z = spectrum.zero_index();
    let zone = params.zero_zone_bins;
    let half = (z - rlo).min(rhi - z);
    let w = ((params.nested_smoothing_spacings * spacing_bins).round() as usize).max(3) | 1;
    let lin: Vec<f64> = (0..db.len()).map(|i| if in_zone(i, z, zone) { 0.0 } else { 10f64.powf(db[i] / 10.0) }).collect();
    let s: Vec<f64> = moving_average(&lin, w).into_iter().map(lin_to_db).collect();

    let kmin = ((params.nested_min_frac * half as f64) as usize).max(zone + 2);
    let kmax = (params.nested_max_frac * half as f64) as usize;
    let mut best: Option<(f64, f64, f64)> = None;
    for k in kmin..kmax {
        let inner: Vec<f64> = (z - k..z - zone).chain(z + zone + 1..=z + k).map(|i| s[i]).collect();
        let outer: Vec<f64> = (z - half..z - k).chain(z + k + 1..=z + half).map(|i| s[i]).collect();
        if inner.is_empty() || outer.is_empty() {
            continue;
        }
        let (il, ol) = (median(&inner), median(&outer));
        if best.is_none_or(|(c, _, _)| il - ol > c) {
            best = Some((il - ol, il, ol));
        }
    }
    let (contrast, il, ol) = best?;
    if contrast < params.nested_step_db {
        return None;
    }
    let mid = 0.5 * (il + ol);
    let mut r = z + half;
    while r > z && s[r] < mid {
        r -= 1;
    }
    let mut l = z - half;
    while l < z && s[l] < mid {
        l += 1;
    }
    let peak = (l..=r).filter(|&k| !in_zone(k, z, zone)).map(|k| db[k]).fold(f64::NEG_INFINITY, f64::max);
    Some(DopplerComponent {
        spread_hz: f[r] - f[l],
        center_hz: 0.5 * (f[r] + f[l]),
        peak_db: peak,
        lo_hz: f[l],
        hi_hz: f[r],
        nested_contrast_db: Some(contrast),
    })
}

/// Power in the zero-Doppler zone relative to total power (dB).
pub fn zero_doppler_ratio_db(spectrum: &DopplerSpectrum, zero_zone_bins: usize) -> f64 {
    let z = spectrum.zero_index();
    let lin: Vec<f64> = spectrum.power_db.iter().map(|d| 10f64.powf(d / 10.0)).collect();
    let total: f64 = lin.iter().sum();
    let zero: f64 = lin.iter().enumerate().filter(|(i, _)| in_zone(*i, z, zero_zone_bins)).map(|(_, p)| p).sum();
    lin_to_db(zero / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureParams {
    pub spread: SpreadParams,
    /// Blade count assumed when converting comb spacing to rotation rate.
    pub n_blades: usize,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self { spread: SpreadParams::default(), n_blades: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroDopplerFeatures {
    /// Spread of the widest component.
    pub doppler_spread_hz: Option<f64>,
    pub spike_spacing_hz: Option<f64>,
    pub slow_time_period_s: Option<f64>,
    pub spectrogram_period_s: Option<f64>,
    pub rotation_rate_hz: Option<f64>,
    pub zero_doppler_ratio_db: f64,
    pub components: Vec<DopplerComponent>,
    /// |T_D - 1/spacing| when both were measured.
    pub period_mismatch_s: Option<f64>,
    /// Whether the mismatch is within the combined resolution of both estimates.
    pub period_consistent: Option<bool>,
    pub doppler_bin_hz: f64,
    /// Spectrum maximum in the same dB scale as the component peaks.
    pub max_power_db: f64,
}

impl MicroDopplerFeatures {
    /// Features with every field absent.
    pub fn empty(doppler_bin_hz: f64) -> Self {
        Self {
            doppler_spread_hz: None,
            spike_spacing_hz: None,
            slow_time_period_s: None,
            spectrogram_period_s: None,
            rotation_rate_hz: None,
            zero_doppler_ratio_db: 0.0,
            components: Vec::new(),
            period_mismatch_s: None,
            period_consistent: None,
            doppler_bin_hz,
            max_power_db: 0.0,
        }
    }
}

/// All features of one observation; failed estimators leave their field empty.
pub fn extract_features(
    spectrum: &DopplerSpectrum,
    spectrogram: Option<&Spectrogram>,
    slow_time: &[Complex64],
    symbol_period: f64,
    params: &FeatureParams,
) -> MicroDopplerFeatures {
    let sp = &params.spread;
    let spacing = estimate_spike_spacing(spectrum, sp).ok();
    let components = estimate_doppler_spread(spectrum, spacing, sp);
    let period = estimate_period(slow_time, symbol_period).ok();
    let (period_mismatch_s, period_consistent) = match (period, spacing) {
        (Some(p), Some(s)) => {
            let mismatch = (p - 1.0 / s).abs();
            // One lag of the period estimate plus the spacing resolution mapped to period.
            let tol = symbol_period + spectrum.bin_hz / (s * s);
            (Some(mismatch), Some(mismatch <= tol))
        }
        _ => (None, None),
    };
    MicroDopplerFeatures {
        doppler_spread_hz: components.first().map(|c| c.spread_hz),
        spike_spacing_hz: spacing,
        slow_time_period_s: period,
        spectrogram_period_s: spectrogram.and_then(|sg| spectrogram_period(sg).ok()),
        rotation_rate_hz: spacing.and_then(|s| estimate_rotation_rate(s, params.n_blades).ok()),
        zero_doppler_ratio_db: zero_doppler_ratio_db(spectrum, sp.zero_zone_bins),
        components,
        period_mismatch_s,
        period_consistent,
        doppler_bin_hz: spectrum.bin_hz,
        max_power_db: spectrum.power_db.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SPEED_OF_LIGHT;
    use crate::receiver::{doppler_axis, doppler_spectrum};
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn spectrum_from_db(db: Vec<f64>, bin_hz: f64) -> DopplerSpectrum {
        let m = db.len();
        let t = 1.0 / (m as f64 * bin_hz);
        DopplerSpectrum { freqs_hz: doppler_axis(m, t), power_db: db, bin_hz, reference_power: 1.0 }
    }

    #[test]
    fn eq1_reference_value() {
        let b = predict_doppler_spread(100.0, 0.2819, PI / 3.0, PI / 2.0, SPEED_OF_LIGHT / 7e9).unwrap();
        // 4 * 2 pi * 100 * 0.2819 * cos(30 deg) / (c / 7e9)
        let oracle = 8.0 * PI * 100.0 * 0.2819 * (3f64.sqrt() / 2.0) * 7e9 / 299_792_458.0;
        assert_relative_eq!(b, oracle, max_relative = 1e-12);
        assert!((b - 1.433e4).abs() < 5.0);
    }

    #[test]
    fn eq1_nulls_and_errors() {
        assert_eq!(predict_doppler_spread(100.0, 0.28, 1.0, 0.0, 0.04).unwrap(), 0.0);
        assert!(predict_doppler_spread(100.0, 0.28, PI, 1.0, 0.04).unwrap().abs() < 1e-9);
        assert!(predict_doppler_spread(100.0, 0.28, 1.0, 1.0, 0.0).is_err());
        assert!(predict_doppler_spread(100.0, 0.0, 1.0, 1.0, 0.04).is_err());
    }

    #[test]
    fn rotation_rate_examples() {
        assert_eq!(estimate_rotation_rate(200.0, 2).unwrap(), 100.0);
        assert_eq!(estimate_rotation_rate(200.0, 1).unwrap(), 200.0);
        assert!(estimate_rotation_rate(200.0, 0).is_err());
    }

    #[test]
    fn synthetic_comb_spacing() {
        let m = 8192;
        let bin = 10.0;
        let mut db = vec![-60.0; m];
        let z = m / 2;
        db[z] = 0.0;
        for k in 1..30i64 {
            for sign in [-1i64, 1] {
                db[(z as i64 + sign * 20 * k) as usize] = -20.0;
            }
        }
        let s = spectrum_from_db(db, bin);
        let p = SpreadParams::default();
        assert!((estimate_spike_spacing(&s, &p).unwrap() - 200.0).abs() <= bin);
        assert!((estimate_spike_spacing_peaks(&s, &p).unwrap() - 200.0).abs() <= bin);
    }

    #[test]
    fn lone_dc_peak_has_no_comb() {
        let mut db = vec![-60.0; 1024];
        db[512] = 0.0;
        db[511] = -6.0;
        db[513] = -6.0;
        let s = spectrum_from_db(db, 10.0);
        assert_eq!(estimate_spike_spacing(&s, &SpreadParams::default()), Err(FeatureError::NoComb));
        assert!(estimate_doppler_spread(&s, None, &SpreadParams::default()).is_empty());
    }

    #[test]
    fn tone_is_one_narrow_component() {
        let m = 4096;
        let t = 1e-5;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let v: Vec<Complex64> = (0..m)
            .map(|k| {
                let (a, b): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
                Complex64::from_polar(1.0, 2.0 * PI * 1000.0 * k as f64 * t) + 1e-3 * Complex64::new(a, b)
            })
            .collect();
        let s = doppler_spectrum(&v, t, Window::Hann).unwrap();
        let comps = estimate_doppler_spread(&s, None, &SpreadParams::default());
        assert_eq!(comps.len(), 1, "{comps:?}");
        assert!(comps[0].spread_hz <= 3.0 * s.bin_hz);
        assert!((comps[0].center_hz - 1000.0).abs() <= 2.0 * s.bin_hz);
    }

    #[test]
    fn flat_noise_has_no_components() {
        let db: Vec<f64> = (0..4096).map(|i| -40.0 + 5.0 * ((i as f64 * 12.9898).sin() * 43758.5453).fract()).collect();
        let s = spectrum_from_db(db, 10.0);
        assert!(estimate_doppler_spread(&s, Some(200.0), &SpreadParams::default()).is_empty());
    }

    #[test]
    fn plateau_support_width() {
        // Flat micro-Doppler shelf from -5 kHz to +5 kHz, 30 dB above the floor.
        let m = 4096;
        let bin = 10.0;
        let s0 = spectrum_from_db(vec![0.0; m], bin);
        let db: Vec<f64> = s0.freqs_hz.iter().map(|f| if f.abs() <= 5000.0 { -10.0 } else { -40.0 }).collect();
        let s = spectrum_from_db(db, bin);
        let comps = estimate_doppler_spread(&s, None, &SpreadParams::default());
        assert_eq!(comps.len(), 1);
        assert!((comps[0].spread_hz - 10_000.0).abs() <= 2.0 * bin, "{comps:?}");
    }

    #[test]
    fn nested_shelf_is_reported() {
        let m = 8192;
        let bin = 10.0;
        let s0 = spectrum_from_db(vec![0.0; m], bin);
        let db: Vec<f64> = s0
            .freqs_hz
            .iter()
            .map(|f| if f.abs() <= 2000.0 { -5.0 } else if f.abs() <= 10_000.0 { -25.0 } else { -50.0 })
            .collect();
        let s = spectrum_from_db(db, bin);
        let comps = estimate_doppler_spread(&s, None, &SpreadParams::default());
        assert_eq!(comps.len(), 2, "{comps:?}");
        assert!((comps[0].spread_hz - 20_000.0).abs() <= 2.0 * bin);
        assert!((comps[1].spread_hz - 4_000.0).abs() <= 6.0 * bin);
        assert!(comps[1].nested_contrast_db.unwrap() >= 19.0);
    }

    #[test]
    fn modulated_magnitude_period() {
        let t = 1e-6;
        let v: Vec<Complex64> = (0..40_000)
            .map(|m| Complex64::new(1.0 + (2.0 * PI * 200.0 * m as f64 * t).cos(), 0.0))
            .collect();
        let p = estimate_period(&v, t).unwrap();
        assert!((p - 5e-3).abs() <= t, "{p}");
        assert_eq!(estimate_period(&vec![Complex64::new(1.0, 0.0); 1000], t), Err(FeatureError::Aperiodic));
    }

    #[test]
    fn spacing_invariant_to_amplitude_scale() {
        let m = 4096;
        let t = 1e-5;
        let v: Vec<Complex64> = (0..m)
            .map(|k| Complex64::from_polar(1.0, 3.0 * (2.0 * PI * 300.0 * k as f64 * t).sin()))
            .collect();
        let p = SpreadParams::default();
        let a = estimate_spike_spacing(&doppler_spectrum(&v, t, Window::Hann).unwrap(), &p).unwrap();
        let v2: Vec<Complex64> = v.iter().map(|c| c * 37.5).collect();
        let b = estimate_spike_spacing(&doppler_spectrum(&v2, t, Window::Hann).unwrap(), &p).unwrap();
        assert!((a - b).abs() < 1e-9 * a);
        assert!((a - 300.0).abs() <= 1.0 / (m as f64 * t));
    }
}
