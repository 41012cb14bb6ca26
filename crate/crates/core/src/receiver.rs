//! Receive chain: channel estimation, range profiles, target gating,
//! slow-time extraction, Doppler spectra, spectrograms and range-Doppler maps.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::waveform::{FreqSymbol, OfdmConfig, SymbolRole};

/// Smallest dB value reported for zero power.
pub const MIN_DB: f64 = -300.0;
/// Minimum number of profiles for noncoherent detection.
pub const MIN_DETECTION_PROFILES: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReceiverError {
    #[error("transmit symbol magnitude below 1e-12 on energized bin {0}")]
    DivisionGuard(usize),
    #[error("symbol length {got} does not match n_carriers {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("detection needs at least {MIN_DETECTION_PROFILES} profiles, got {0}")]
    TooFewProfiles(usize),
    #[error("gate is empty")]
    EmptyGate,
    #[error("gate bin {bin} outside 0..{len}")]
    GateOutOfRange { bin: usize, len: usize },
    #[error("profiles have inconsistent lengths")]
    InconsistentProfiles,
    #[error("window length {window} exceeds signal length {len}")]
    WindowTooLong { window: usize, len: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Window {
    Rectangular,
    #[default]
    Hann,
}

impl Window {
    /// Periodic (DFT-even) window coefficients.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann => (0..len)
                .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / len as f64).cos())
                .collect(),
        }
    }
}

fn to_db(p: f64, reference: f64) -> f64 {
    if p > 0.0 && reference > 0.0 {
        (10.0 * (p / reference).log10()).max(MIN_DB)
    } else {
        MIN_DB
    }
}

/// Circularly shifts a DFT so index 0 holds the most negative frequency.
fn fftshift<T: Copy>(x: &[T]) -> Vec<T> {
    let m = x.len();
    let h = m / 2;
    (0..m).map(|k| x[(k + m - h) % m]).collect()
}

/// Doppler axis for an M-point shifted DFT with symbol period `t`.
pub fn doppler_axis(m: usize, t: f64) -> Vec<f64> {
    let h = (m / 2) as f64;
    (0..m).map(|k| (k as f64 - h) / (m as f64 * t)).collect()
}

/// Channel estimate and the mask of bins it covers.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub h: FreqSymbol,
    /// True on energized non-pilot bins; other bins are zero in `h`.
    pub included: Vec<bool>,
}

/// H = Y / X on energized non-pilot bins.
pub fn estimate_channel(y: &FreqSymbol, x: &FreqSymbol, cfg: &OfdmConfig) -> Result<ChannelEstimate, ReceiverError> {
    let n = cfg.n_carriers;
    for s in [y, x] {
        if s.len() != n {
            return Err(ReceiverError::LengthMismatch { expected: n, got: s.len() });
        }
    }
    let included = cfg.included_mask();
    let mut h = FreqSymbol::zeros(n, SymbolRole::Channel);
    for (i, inc) in included.iter().enumerate() {
        if *inc {
            if x.bins[i].norm() < 1e-12 {
                return Err(ReceiverError::DivisionGuard(i));
            }
            h.bins[i] = y.bins[i] / x.bins[i];
        }
    }
    Ok(ChannelEstimate { h, included })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfile {
    pub bins: Vec<Complex64>,
    /// Delay per bin, 1/f_s.
    pub delay_step: f64,
    pub symbol_index: usize,
}

impl RangeProfile {
    pub fn energy(&self) -> f64 {
        self.bins.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Reusable inverse-DFT range compression with a taper across the energized band.
pub struct RangeProcessor {
    taper: Vec<f64>,
    ifft: Arc<dyn Fft<f64>>,
    delay_step: f64,
    scale: f64,
}

impl RangeProcessor {
    pub fn new(cfg: &OfdmConfig, window: Window) -> Self {
        let n = cfg.n_carriers;
        let mut taper = vec![0.0; n];
        let w = window.coefficients(cfg.energized.len());
        // The energized list is in ascending frequency, so the taper is too.
        for (j, &i) in cfg.energized.iter().enumerate() {
            taper[i] = if window == Window::Hann && cfg.energized.len() > 1 {
                // Symmetric placement: skip the periodic window's leading zero.
                0.5 - 0.5 * (std::f64::consts::TAU * (j as f64 + 0.5) / cfg.energized.len() as f64).cos()
            } else {
                w[j]
            };
        }
        let ifft = FftPlanner::new().plan_fft_inverse(n);
        Self { taper, ifft, delay_step: cfg.delay_step(), scale: 1.0 / (n as f64).sqrt() }
    }

    /// Taper applied to the channel estimate before the inverse DFT.
    pub fn taper(&self) -> &[f64] {
        &self.taper
    }

    /// Unitary inverse DFT of the tapered estimate; bin r is delay r / f_s.
    pub fn profile(&self, h: &FreqSymbol, symbol_index: usize) -> RangeProfile {
        let mut buf: Vec<Complex64> = h.bins.iter().zip(&self.taper).map(|(c, w)| c * (w * self.scale)).collect();
        self.ifft.process(&mut buf);
        RangeProfile { bins: buf, delay_step: self.delay_step, symbol_index }
    }
}

/// One-shot range profile of a channel estimate.
pub fn range_profile(h: &FreqSymbol, cfg: &OfdmConfig, window: Window, symbol_index: usize) -> RangeProfile {
    RangeProcessor::new(cfg, window).profile(h, symbol_index)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionParams {
    /// Threshold above the median floor of the integrated profile (dB).
    pub threshold_db: f64,
    /// Guard bins added on each side of the detected cluster.
    pub guard_bins: usize,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self { threshold_db: 12.0, guard_bins: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeGate {
    /// Contiguous, ascending range-bin indices.
    pub bins: Vec<usize>,
    /// Strongest integrated bin inside the gate.
    pub peak_bin: usize,
    /// Peak integrated power over the median floor (dB).
    pub peak_over_floor_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Detection {
    Target(RangeGate),
    NoTarget,
}

/// Noncoherent sum of |profile|^2 over symbols.
pub fn integrate_profiles(profiles: &[RangeProfile]) -> Result<Vec<f64>, ReceiverError> {
    let n = profiles.first().map_or(0, |p| p.bins.len());
    let mut acc = vec![0.0; n];
    for p in profiles {
        if p.bins.len() != n {
            return Err(ReceiverError::InconsistentProfiles);
        }
        for (a, c) in acc.iter_mut().zip(&p.bins) {
            *a += c.norm_sqr();
        }
    }
    Ok(acc)
}

pub(crate) fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Gate from an integrated power profile: the strongest contiguous run above
/// median + threshold, widened by the guard bins.
pub fn detect_in_power(power: &[f64], params: &DetectionParams) -> Detection {
    let floor = median(power);
    if !(floor.is_finite()) {
        return Detection::NoTarget;
    }
    let thr = floor * 10f64.powf(params.threshold_db / 10.0);
    let mut best: Option<(usize, usize, f64)> = None;
    let mut i = 0;
    while i < power.len() {
        if power[i] > thr && power[i] > 0.0 {
            let start = i;
            let mut sum = 0.0;
            while i < power.len() && power[i] > thr {
                sum += power[i];
                i += 1;
            }
            if best.is_none_or(|(_, _, s)| sum > s) {
                best = Some((start, i, sum));
            }
        } else {
            i += 1;
        }
    }
    let Some((start, end, _)) = best else {
        return Detection::NoTarget;
    };
    let lo = start.saturating_sub(params.guard_bins);
    let hi = (end + params.guard_bins).min(power.len());
    let peak_bin = (start..end).max_by(|&a, &b| power[a].total_cmp(&power[b])).unwrap_or(start);
    let peak_over_floor_db = if floor > 0.0 { 10.0 * (power[peak_bin] / floor).log10() } else { f64::INFINITY };
    Detection::Target(RangeGate { bins: (lo..hi).collect(), peak_bin, peak_over_floor_db })
}

pub fn detect_target(profiles: &[RangeProfile], params: &DetectionParams) -> Result<Detection, ReceiverError> {
    if profiles.len() < MIN_DETECTION_PROFILES {
        return Err(ReceiverError::TooFewProfiles(profiles.len()));
    }
    Ok(detect_in_power(&integrate_profiles(profiles)?, params))
}

/// Grid metadata carried with a slow-time matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileMeta {
    pub n_carriers: usize,
    pub sample_rate: f64,
    pub symbol_period: f64,
    pub center_freq: f64,
}

impl ProfileMeta {
    pub fn from_config(cfg: &OfdmConfig) -> Self {
        Self {
            n_carriers: cfg.n_carriers,
            sample_rate: cfg.sample_rate,
            symbol_period: cfg.symbol_period(),
            center_freq: cfg.center_freq,
        }
    }
}

/// Gated range bins across symbols: one row per gate bin, one column per symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct SlowTimeMatrix {
    pub data: Array2<Complex64>,
    pub gate: Vec<usize>,
    pub meta: ProfileMeta,
}

impl SlowTimeMatrix {
    pub fn new(data: Array2<Complex64>, gate: Vec<usize>, meta: ProfileMeta) -> Result<Self, ReceiverError> {
        if gate.is_empty() || data.nrows() == 0 {
            return Err(ReceiverError::EmptyGate);
        }
        if data.nrows() != gate.len() {
            return Err(ReceiverError::InconsistentProfiles);
        }
        if let Some(&bin) = gate.iter().find(|&&b| b >= meta.n_carriers) {
            return Err(ReceiverError::GateOutOfRange { bin, len: meta.n_carriers });
        }
        Ok(Self { data, gate, meta })
    }

    pub fn n_symbols(&self) -> usize {
        self.data.ncols()
    }

    pub fn symbol_period(&self) -> f64 {
        self.meta.symbol_period
    }

    /// Coherent sum over the gate, one value per symbol.
    pub fn gate_sum(&self) -> Vec<Complex64> {
        self.data.sum_axis(ndarray::Axis(0)).to_vec()
    }

    pub fn row(&self, i: usize) -> Vec<Complex64> {
        self.data.row(i).to_vec()
    }
}

pub fn slow_time(profiles: &[RangeProfile], gate: &[usize], cfg: &OfdmConfig) -> Result<SlowTimeMatrix, ReceiverError> {
    if gate.is_empty() {
        return Err(ReceiverError::EmptyGate);
    }
    let n = profiles.first().map_or(cfg.n_carriers, |p| p.bins.len());
    if let Some(&bin) = gate.iter().find(|&&b| b >= n) {
        return Err(ReceiverError::GateOutOfRange { bin, len: n });
    }
    if profiles.iter().any(|p| p.bins.len() != n) {
        return Err(ReceiverError::InconsistentProfiles);
    }
    let data = Array2::from_shape_fn((gate.len(), profiles.len()), |(r, m)| profiles[m].bins[gate[r]]);
    SlowTimeMatrix::new(data, gate.to_vec(), ProfileMeta::from_config(cfg))
}

/// Power spectrum over slow time, shifted to [-1/(2T), 1/(2T)) and normalized to 0 dB max.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DopplerSpectrum {
    pub freqs_hz: Vec<f64>,
    pub power_db: Vec<f64>,
    /// Doppler resolution 1/(M T).
    pub bin_hz: f64,
    /// Linear power mapped to 0 dB.
    pub reference_power: f64,
}

impl DopplerSpectrum {
    pub fn len(&self) -> usize {
        self.power_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power_db.is_empty()
    }

    /// Index of the 0 Hz bin.
    pub fn zero_index(&self) -> usize {
        self.len() / 2
    }

    /// Index of the bin nearest `f`.
    pub fn index_of(&self, f: f64) -> usize {
        let k = (f / self.bin_hz).round() as i64 + self.zero_index() as i64;
        k.clamp(0, self.len() as i64 - 1) as usize
    }
}

fn windowed_power_spectrum(v: &[Complex64], window: Window, fft: &Arc<dyn Fft<f64>>) -> Vec<f64> {
    let w = window.coefficients(v.len());
    let mut buf: Vec<Complex64> = v.iter().zip(&w).map(|(c, w)| c * w).collect();
    fft.process(&mut buf);
    fftshift(&buf).iter().map(|c| c.norm_sqr()).collect()
}

pub fn doppler_spectrum(v: &[Complex64], symbol_period: f64, window: Window) -> Result<DopplerSpectrum, ReceiverError> {
    let m = v.len();
    if m < 2 {
        return Err(ReceiverError::InvalidParameter("slow-time vector needs at least 2 samples"));
    }
    let fft = FftPlanner::new().plan_fft_forward(m);
    let p = windowed_power_spectrum(v, window, &fft);
    let reference_power = p.iter().cloned().fold(0.0, f64::max);
    Ok(DopplerSpectrum {
        freqs_hz: doppler_axis(m, symbol_period),
        power_db: p.iter().map(|&x| to_db(x, reference_power)).collect(),
        bin_hz: 1.0 / (m as f64 * symbol_period),
        reference_power,
    })
}

/// Short-time power spectra, frames along rows and Doppler along columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// frames x Doppler bins, dB relative to the global max.
    pub power_db: Array2<f64>,
    /// Frame centers (s).
    pub times_s: Vec<f64>,
    pub freqs_hz: Vec<f64>,
    pub window_len: usize,
    pub hop: usize,
    pub symbol_period: f64,
    pub reference_power: f64,
}

pub fn stft_spectrogram(
    v: &[Complex64],
    symbol_period: f64,
    window_len: usize,
    hop: usize,
    window: Window,
) -> Result<Spectrogram, ReceiverError> {
    if window_len == 0 || hop == 0 {
        return Err(ReceiverError::InvalidParameter("window length and hop must be >= 1"));
    }
    if window_len > v.len() {
        return Err(ReceiverError::WindowTooLong { window: window_len, len: v.len() });
    }
    let frames = (v.len() - window_len) / hop + 1;
    let fft = FftPlanner::new().plan_fft_forward(window_len);
    let mut lin = Array2::<f64>::zeros((frames, window_len));
    for f in 0..frames {
        let s = f * hop;
        let p = windowed_power_spectrum(&v[s..s + window_len], window, &fft);
        lin.row_mut(f).assign(&ndarray::ArrayView1::from(&p[..]));
    }
    let reference_power = lin.iter().cloned().fold(0.0, f64::max);
    Ok(Spectrogram {
        power_db: lin.mapv(|x| to_db(x, reference_power)),
        times_s: (0..frames).map(|f| (f * hop) as f64 * symbol_period + window_len as f64 * symbol_period / 2.0).collect(),
        freqs_hz: doppler_axis(window_len, symbol_period),
        window_len,
        hop,
        symbol_period,
        reference_power,
    })
}

/// Range bin by Doppler bin power map.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerMap {
    /// gate rows x Doppler bins, dB relative to the global max.
    pub power_db: Array2<f64>,
    pub range_bins: Vec<usize>,
    pub delays_s: Vec<f64>,
    pub freqs_hz: Vec<f64>,
    pub bin_hz: f64,
    pub reference_power: f64,
}

pub fn range_doppler(stm: &SlowTimeMatrix, window: Window) -> Result<RangeDopplerMap, ReceiverError> {
    let (rows, m) = stm.data.dim();
    if rows == 0 {
        return Err(ReceiverError::EmptyGate);
    }
    if m < 2 {
        return Err(ReceiverError::InvalidParameter("slow-time matrix needs at least 2 symbols"));
    }
    let fft = FftPlanner::new().plan_fft_forward(m);
    let mut lin = Array2::<f64>::zeros((rows, m));
    for r in 0..rows {
        let p = windowed_power_spectrum(&stm.row(r), window, &fft);
        lin.row_mut(r).assign(&ndarray::ArrayView1::from(&p[..]));
    }
    let reference_power = lin.iter().cloned().fold(0.0, f64::max);
    let t = stm.symbol_period();
    Ok(RangeDopplerMap {
        power_db: lin.mapv(|x| to_db(x, reference_power)),
        range_bins: stm.gate.clone(),
        delays_s: stm.gate.iter().map(|&b| b as f64 / stm.meta.sample_rate).collect(),
        freqs_hz: doppler_axis(m, t),
        bin_hz: 1.0 / (m as f64 * t),
        reference_power,
    })
}
