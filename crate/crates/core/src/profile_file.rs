//! Binary slow-time matrix container.
//!
//! Layout, all integers and floats little-endian:
//!
//! | bytes          | field                                    |
//! |----------------|------------------------------------------|
//! | 4              | magic `VMDP`                             |
//! | 2              | version (1)                              |
//! | 2              | reserved, zero                           |
//! | 4              | N, carriers per symbol                   |
//! | 4              | M, symbols (columns)                     |
//! | 4              | rows, gated range bins                   |
//! | 8              | f_s (Hz, f64)                            |
//! | 8              | T (s, f64)                               |
//! | 8              | f_c (Hz, f64)                            |
//! | 4 * rows       | gate range-bin indices (u32)             |
//! | 32             | SHA-256 of all preceding header bytes    |
//! | 8 * rows * M   | payload: row-major (re, im) f32 pairs    |

use std::fs;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::receiver::{ProfileMeta, ReceiverError, SlowTimeMatrix};

pub const MAGIC: [u8; 4] = *b"VMDP";
pub const VERSION: u16 = 1;
const FIXED_HEADER: usize = 4 + 2 + 2 + 4 * 3 + 8 * 3;
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum ProfileFileError {
    #[error("bad magic: not a slow-time profile file")]
    Magic,
    #[error("unsupported profile file version {0}")]
    Version(u16),
    #[error("header checksum mismatch")]
    Checksum,
    #[error("length mismatch: expected {expected} bytes, found {found}")]
    Length { expected: usize, found: usize },
    #[error("matrix too large for the file format")]
    TooLarge,
    #[error(transparent)]
    Matrix(#[from] ReceiverError),
    #[error("profile file {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const K: usize>(&mut self) -> [u8; K] {
        let out: [u8; K] = self.buf[self.pos..self.pos + K].try_into().expect("length checked");
        self.pos += K;
        out
    }

    fn u16(&mut self) -> u16 {
        u16::from_le_bytes(self.take())
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }

    fn f32(&mut self) -> f32 {
        f32::from_le_bytes(self.take())
    }
}

fn to_u32(v: usize) -> Result<u32, ProfileFileError> {
    u32::try_from(v).map_err(|_| ProfileFileError::TooLarge)
}

/// Serializes a slow-time matrix. Samples are stored as f32, so values
/// outside f32 precision are rounded.
pub fn encode_profile(stm: &SlowTimeMatrix) -> Result<Vec<u8>, ProfileFileError> {
    let (rows, m) = stm.data.dim();
    let mut out = Vec::with_capacity(FIXED_HEADER + 4 * rows + CHECKSUM_LEN + 8 * rows * m);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&to_u32(stm.meta.n_carriers)?.to_le_bytes());
    out.extend_from_slice(&to_u32(m)?.to_le_bytes());
    out.extend_from_slice(&to_u32(rows)?.to_le_bytes());
    out.extend_from_slice(&stm.meta.sample_rate.to_le_bytes());
    out.extend_from_slice(&stm.meta.symbol_period.to_le_bytes());
    out.extend_from_slice(&stm.meta.center_freq.to_le_bytes());
    for &g in &stm.gate {
        out.extend_from_slice(&to_u32(g)?.to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    for c in stm.data.iter() {
        out.extend_from_slice(&(c.re as f32).to_le_bytes());
        out.extend_from_slice(&(c.im as f32).to_le_bytes());
    }
    Ok(out)
}

/// Parses a profile file, checking magic, version, checksum and length.
pub fn decode_profile(buf: &[u8]) -> Result<SlowTimeMatrix, ProfileFileError> {
    if buf.len() < 4 || buf[..4] != MAGIC {
        return Err(ProfileFileError::Magic);
    }
    if buf.len() < FIXED_HEADER {
        return Err(ProfileFileError::Length { expected: FIXED_HEADER, found: buf.len() });
    }
    let mut r = Reader { buf, pos: 4 };
    let version = r.u16();
    if version != VERSION {
        return Err(ProfileFileError::Version(version));
    }
    let _reserved = r.u16();
    let n_carriers = r.u32() as usize;
    let m = r.u32() as usize;
    let rows = r.u32() as usize;
    let sample_rate = r.f64();
    let symbol_period = r.f64();
    let center_freq = r.f64();
    let header_len = FIXED_HEADER + 4 * rows;
    let expected = rows
        .checked_mul(m)
        .and_then(|v| v.checked_mul(8))
        .and_then(|v| v.checked_add(header_len + CHECKSUM_LEN))
        .ok_or(ProfileFileError::TooLarge)?;
    if buf.len() < header_len + CHECKSUM_LEN {
        return Err(ProfileFileError::Length { expected, found: buf.len() });
    }
    if Sha256::digest(&buf[..header_len]).as_slice() != &buf[header_len..header_len + CHECKSUM_LEN] {
        return Err(ProfileFileError::Checksum);
    }
    if buf.len() != expected {
        return Err(ProfileFileError::Length { expected, found: buf.len() });
    }
    let gate: Vec<usize> = (0..rows).map(|_| r.u32() as usize).collect();
    r.pos = header_len + CHECKSUM_LEN;
    let mut values = Vec::with_capacity(rows * m);
    for _ in 0..rows * m {
        let re = r.f32();
        let im = r.f32();
        values.push(Complex64::new(re as f64, im as f64));
    }
    let data = Array2::from_shape_vec((rows, m), values).expect("shape matches length");
    let meta = ProfileMeta { n_carriers, sample_rate, symbol_period, center_freq };
    Ok(SlowTimeMatrix::new(data, gate, meta)?)
}

pub fn write_profile(path: &Path, stm: &SlowTimeMatrix) -> Result<(), ProfileFileError> {
    let bytes = encode_profile(stm)?;
    fs::write(path, bytes).map_err(|source| ProfileFileError::Io { path: path.display().to_string(), source })
}

/// Reads a slow-time matrix written by [`write_profile`].
pub fn ingest_profile(path: &Path) -> Result<SlowTimeMatrix, ProfileFileError> {
    let bytes = fs::read(path).map_err(|source| ProfileFileError::Io { path: path.display().to_string(), source })?;
    decode_profile(&bytes)
}
