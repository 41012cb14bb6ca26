//! OFDM sounding grid, Newman-phase multitone symbol and crest factor.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveformError {
    #[error("invalid OFDM configuration: {0}")]
    InvalidConfig(String),
    #[error("energized set is empty")]
    EmptyEnergized,
    #[error("crest factor of an all-zero symbol is undefined")]
    ZeroSymbol,
}

/// Default carrier count per symbol.
pub const DEFAULT_CARRIERS: usize = 2500;
/// Default number of energized carriers.
pub const DEFAULT_ENERGIZED: usize = 2048;
/// Default carrier frequency (Hz).
pub const DEFAULT_CENTER_FREQ: f64 = 7e9;
/// Default occupied bandwidth (Hz).
pub const DEFAULT_BANDWIDTH: f64 = 2.4e9;
/// Default number of symbols per observation.
pub const DEFAULT_SYMBOLS: usize = 16384;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfdmConfig {
    /// Total frequency bins N per symbol.
    pub n_carriers: usize,
    /// Energized bin indices, ordered by ascending baseband frequency.
    pub energized: Vec<usize>,
    /// Pilot indices, a subset of `energized`, excluded from channel estimates.
    pub pilots: Vec<usize>,
    /// Sample rate f_s (Hz); carrier spacing is f_s / N.
    pub sample_rate: f64,
    /// Number of symbols M in one observation.
    pub n_symbols: usize,
    /// Carrier frequency f_c (Hz).
    pub center_freq: f64,
    /// Occupied bandwidth (Hz); informational.
    pub bandwidth: f64,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self::centered(DEFAULT_CARRIERS, DEFAULT_ENERGIZED, DEFAULT_BANDWIDTH, DEFAULT_CENTER_FREQ, DEFAULT_SYMBOLS)
    }
}

impl OfdmConfig {
    /// `k` energized bins centered on DC, with the sample rate chosen so the
    /// energized bins span exactly `bandwidth`.
    pub fn centered(n: usize, k: usize, bandwidth: f64, center_freq: f64, n_symbols: usize) -> Self {
        let sample_rate = bandwidth * n as f64 / k.max(1) as f64;
        Self {
            n_carriers: n,
            energized: centered_indices(n, k),
            pilots: Vec::new(),
            sample_rate,
            n_symbols,
            center_freq,
            bandwidth,
        }
    }

    /// Rectangular symbol without cyclic prefix: T = N / f_s.
    pub fn symbol_period(&self) -> f64 {
        self.n_carriers as f64 / self.sample_rate
    }

    pub fn carrier_spacing(&self) -> f64 {
        self.sample_rate / self.n_carriers as f64
    }

    /// Unambiguous Doppler span 1/T.
    pub fn doppler_span(&self) -> f64 {
        1.0 / self.symbol_period()
    }

    /// Doppler resolution 1/(M T).
    pub fn doppler_bin(&self) -> f64 {
        1.0 / (self.n_symbols as f64 * self.symbol_period())
    }

    /// Delay resolution 1/f_s.
    pub fn delay_step(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn validate(&self) -> Result<(), WaveformError> {
        let bad = |s: String| Err(WaveformError::InvalidConfig(s));
        if self.n_carriers == 0 {
            return bad("n_carriers must be >= 1".into());
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return bad("sample_rate must be > 0".into());
        }
        if !(self.center_freq > 0.0 && self.center_freq.is_finite()) {
            return bad("center_freq must be > 0".into());
        }
        if self.n_symbols < 2 {
            return bad("n_symbols must be >= 2".into());
        }
        if self.energized.len() > self.n_carriers {
            return bad("energized set larger than n_carriers".into());
        }
        let set: BTreeSet<usize> = self.energized.iter().copied().collect();
        if set.len() != self.energized.len() {
            return bad("energized set has duplicate indices".into());
        }
        if let Some(&i) = self.energized.iter().find(|&&i| i >= self.n_carriers) {
            return bad(format!("energized index {i} out of range"));
        }
        if let Some(&p) = self.pilots.iter().find(|p| !set.contains(p)) {
            return bad(format!("pilot index {p} is not energized"));
        }
        Ok(())
    }

    /// Boolean mask of energized bins.
    pub fn energized_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n_carriers];
        for &i in &self.energized {
            m[i] = true;
        }
        m
    }

    /// Mask of bins used by the channel estimate (energized and not pilot).
    pub fn included_mask(&self) -> Vec<bool> {
        let mut m = self.energized_mask();
        for &p in &self.pilots {
            m[p] = false;
        }
        m
    }
}

/// `k` bins with signed baseband indices in [-k/2, k/2), listed by ascending frequency.
pub fn centered_indices(n: usize, k: usize) -> Vec<usize> {
    let k = k.min(n);
    let lo = -((k / 2) as i64);
    (0..k as i64).map(|j| (lo + j).rem_euclid(n as i64) as usize).collect()
}

/// Signed integer frequency index of bin `n` on an `n_total` grid.
pub fn signed_index(n: usize, n_total: usize) -> i64 {
    if 2 * n < n_total {
        n as i64
    } else {
        n as i64 - n_total as i64
    }
}

/// Baseband carrier frequencies in [-f_s/2, f_s/2), indexed by bin.
pub fn carrier_frequencies(cfg: &OfdmConfig) -> Vec<f64> {
    let df = cfg.carrier_spacing();
    (0..cfg.n_carriers).map(|n| signed_index(n, cfg.n_carriers) as f64 * df).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymbolRole {
    Transmit,
    Receive,
    Channel,
}

/// One frequency-domain symbol over all N bins.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqSymbol {
    pub bins: Vec<Complex64>,
    pub role: SymbolRole,
}

impl FreqSymbol {
    pub fn zeros(n: usize, role: SymbolRole) -> Self {
        Self { bins: vec![Complex64::new(0.0, 0.0); n], role }
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.bins.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Newman phase of tone `j` out of `k`: pi j^2 / k.
pub fn newman_phase(j: usize, k: usize) -> f64 {
    let j = j as f64;
    PI * j * j / k as f64
}

/// Unit-magnitude multitone on the energized bins with Newman phases
/// assigned in energized-set order.
pub fn newman_symbol(cfg: &OfdmConfig) -> Result<FreqSymbol, WaveformError> {
    let k = cfg.energized.len();
    if k == 0 {
        return Err(WaveformError::EmptyEnergized);
    }
    let mut sym = FreqSymbol::zeros(cfg.n_carriers, SymbolRole::Transmit);
    for (j, &n) in cfg.energized.iter().enumerate() {
        // Reduce before the trig call to keep the phase accurate for large j.
        let phase = (newman_phase(j, k)).rem_euclid(2.0 * PI);
        sym.bins[n] = Complex64::from_polar(1.0, phase);
    }
    Ok(sym)
}

/// Zero-phase comb on the energized bins (worst-case crest factor reference).
pub fn zero_phase_symbol(cfg: &OfdmConfig) -> FreqSymbol {
    let mut sym = FreqSymbol::zeros(cfg.n_carriers, SymbolRole::Transmit);
    for &n in &cfg.energized {
        sym.bins[n] = Complex64::new(1.0, 0.0);
    }
    sym
}

/// Oversampling factor used by [`crest_factor_db`].
pub const CREST_OVERSAMPLE: usize = 4;

/// Peak-to-mean power ratio (dB) of the time-domain symbol, computed by a
/// zero-padded inverse DFT with [`CREST_OVERSAMPLE`] times oversampling.
pub fn crest_factor_db(sym: &FreqSymbol) -> Result<f64, WaveformError> {
    let n = sym.len();
    if sym.energy() == 0.0 {
        return Err(WaveformError::ZeroSymbol);
    }
    let l = n * CREST_OVERSAMPLE;
    let mut buf = vec![Complex64::new(0.0, 0.0); l];
    for (i, c) in sym.bins.iter().enumerate() {
        let s = signed_index(i, n);
        buf[s.rem_euclid(l as i64) as usize] = *c;
    }
    FftPlanner::new().plan_fft_inverse(l).process(&mut buf);
    let powers: Vec<f64> = buf.iter().map(|c| c.norm_sqr()).collect();
    let peak = powers.iter().cloned().fold(0.0, f64::max);
    let mean = powers.iter().sum::<f64>() / l as f64;
    Ok(10.0 * (peak / mean).log10())
}
