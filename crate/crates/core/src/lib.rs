//! Bistatic OFDM micro-Doppler simulation and rule-based flight-mode
//! classification for VTOL drones.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod airframe;
pub mod classifier;
pub mod features;
pub mod geometry;
pub mod output;
pub mod pipeline;
pub mod profile_file;
pub mod receiver;
pub mod scenario;
pub mod synth;
pub mod waveform;
