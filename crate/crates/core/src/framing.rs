//! Payload bytes to CSS symbols.
//!
//! Bits are taken most-significant first, zero-padded up to a multiple of the
//! spreading factor and sliced into `S`-bit symbols.

use crate::error::{Error, Result};
use crate::modem::{SymbolIndex, MAX_SPREADING_FACTOR, MIN_SPREADING_FACTOR};

fn check_sf(spreading_factor: u32) -> Result<()> {
    if (MIN_SPREADING_FACTOR..=MAX_SPREADING_FACTOR).contains(&spreading_factor) {
        Ok(())
    } else {
        Err(Error::SpreadingFactor(spreading_factor))
    }
}

/// `ceil(8 B / S)`.
pub fn symbols_per_frame(payload_bytes: usize, spreading_factor: u32) -> usize {
    (8 * payload_bytes).div_ceil(spreading_factor as usize)
}

/// `ceil(8 B / S) * 2^S`.
pub fn frame_sample_count(payload_bytes: usize, spreading_factor: u32) -> usize {
    symbols_per_frame(payload_bytes, spreading_factor) << spreading_factor
}

pub fn bytes_to_symbols(payload: &[u8], spreading_factor: u32) -> Result<Vec<SymbolIndex>> {
    let mut out = Vec::new();
    bytes_to_symbols_into(payload, spreading_factor, &mut out)?;
    Ok(out)
}

/// Like [`bytes_to_symbols`] but reuses `out`.
pub fn bytes_to_symbols_into(payload: &[u8], spreading_factor: u32, out: &mut Vec<SymbolIndex>) -> Result<()> {
    check_sf(spreading_factor)?;
    if payload.is_empty() {
        return Err(Error::EmptyPayload);
    }
    let sf = spreading_factor;
    let mask = (1u64 << sf) - 1;
    out.clear();
    let mut acc = 0u64;
    let mut bits = 0u32;
    for &byte in payload {
        acc = (acc << 8) | u64::from(byte);
        bits += 8;
        while bits >= sf {
            bits -= sf;
            out.push(SymbolIndex::new(((acc >> bits) & mask) as u32, 1 << sf)?);
        }
        acc &= (1u64 << bits) - 1;
    }
    if bits > 0 {
        out.push(SymbolIndex::new(((acc << (sf - bits)) & mask) as u32, 1 << sf)?);
    }
    Ok(())
}

/// Inverse of [`bytes_to_symbols`]; padding bits are dropped.
pub fn symbols_to_bytes(symbols: &[SymbolIndex], spreading_factor: u32, payload_bytes: usize) -> Result<Vec<u8>> {
    check_sf(spreading_factor)?;
    let expected = symbols_per_frame(payload_bytes, spreading_factor);
    if symbols.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: symbols.len(),
        });
    }
    let sf = spreading_factor;
    let mut out = Vec::with_capacity(payload_bytes);
    let mut acc = 0u64;
    let mut bits = 0u32;
    for s in symbols {
        if s.value() >> sf != 0 {
            return Err(Error::SymbolOutOfRange {
                value: s.value(),
                symbol_length: 1 << sf,
            });
        }
        acc = (acc << sf) | u64::from(s.value());
        bits += sf;
        while bits >= 8 && out.len() < payload_bytes {
            bits -= 8;
            out.push((acc >> bits) as u8);
        }
        acc &= (1u64 << bits) - 1;
    }
    Ok(out)
}

/// Payload bytes together with their symbol mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePayload {
    bytes: Vec<u8>,
    spreading_factor: u32,
    symbols: Vec<SymbolIndex>,
}

impl FramePayload {
    pub fn new(bytes: Vec<u8>, spreading_factor: u32) -> Result<Self> {
        let symbols = bytes_to_symbols(&bytes, spreading_factor)?;
        Ok(Self {
            bytes,
            spreading_factor,
            symbols,
        })
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn spreading_factor(&self) -> u32 {
        self.spreading_factor
    }

    pub fn symbols(&self) -> &[SymbolIndex] {
        &self.symbols
    }
}
