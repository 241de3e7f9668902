//! Discrete-time chirp-spread-spectrum modulation and DFT-based demodulation.
//!
//! A CSS alphabet of spreading factor `S` has `M = 2^S` symbols. Symbol `m`
//! is the basic up-chirp cyclically delayed by `m` samples. The receiver
//! compensates the channel estimate, multiplies by the conjugate basic chirp
//! (dechirp), takes an `M`-point DFT and picks the strongest bin.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const MIN_SPREADING_FACTOR: u32 = 2;
pub const MAX_SPREADING_FACTOR: u32 = 16;

/// Spreading factors used by LoRa.
pub const LORA_SPREADING_FACTORS: std::ops::RangeInclusive<u32> = 7..=12;

pub const DEFAULT_BANDWIDTH_HZ: f64 = 125_000.0;

/// Spreading factor and bandwidth of a CSS link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModemParams {
    spreading_factor: u32,
    bandwidth_hz: f64,
}

impl ModemParams {
    pub fn new(spreading_factor: u32, bandwidth_hz: f64) -> Result<Self> {
        if !(MIN_SPREADING_FACTOR..=MAX_SPREADING_FACTOR).contains(&spreading_factor) {
            return Err(Error::SpreadingFactor(spreading_factor));
        }
        if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
            return Err(Error::Bandwidth(bandwidth_hz));
        }
        Ok(Self {
            spreading_factor,
            bandwidth_hz,
        })
    }

    /// Parameters at the default 125 kHz bandwidth.
    pub fn with_default_bandwidth(spreading_factor: u32) -> Result<Self> {
        Self::new(spreading_factor, DEFAULT_BANDWIDTH_HZ)
    }

    pub fn spreading_factor(&self) -> u32 {
        self.spreading_factor
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    /// Samples per symbol, `M = 2^S`.
    pub fn symbol_length(&self) -> usize {
        1usize << self.spreading_factor
    }

    /// `T_sym = 2^S / W`.
    pub fn symbol_duration_s(&self) -> f64 {
        self.symbol_length() as f64 / self.bandwidth_hz
    }

    /// One sample per `1 / W` seconds.
    pub fn sample_interval_s(&self) -> f64 {
        1.0 / self.bandwidth_hz
    }
}

/// A CSS symbol value `0 <= m < M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymbolIndex(u32);

impl SymbolIndex {
    pub fn new(value: u32, symbol_length: usize) -> Result<Self> {
        if (value as usize) < symbol_length {
            Ok(Self(value))
        } else {
            Err(Error::SymbolOutOfRange { value, symbol_length })
        }
    }

    pub fn value(self) -> u32 {
        self.0
    }
}

impl fmt::Display for SymbolIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Precomputed basic chirp `x0[n] = exp(j 2 pi (n^2 / 2M - n / 2))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChirpTable {
    spreading_factor: u32,
    samples: Vec<Complex64>,
}

/// Builds the basic (symbol 0) chirp for `params`.
pub fn basic_chirp(params: &ModemParams) -> ChirpTable {
    let m = params.symbol_length() as u64;
    let two_m = 2 * m;
    let samples = (0..m)
        .map(|n| {
            // Reduce the phase modulo one full turn in integer arithmetic so that
            // large n keeps full precision: n^2/2M - n/2 = ((n^2 mod 2M) - M (n mod 2)) / 2M.
            let num = ((n * n) % two_m) as i64 - (m * (n % 2)) as i64;
            let turns = num as f64 / two_m as f64;
            Complex64::from_polar(1.0, TAU * turns)
        })
        .collect();
    ChirpTable {
        spreading_factor: params.spreading_factor(),
        samples,
    }
}

impl ChirpTable {
    pub fn spreading_factor(&self) -> u32 {
        self.spreading_factor
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn symbol(&self, value: u32) -> Result<SymbolIndex> {
        SymbolIndex::new(value, self.len())
    }

    /// `x_m[n] = x0[(n - m) mod M]`.
    pub fn modulate_symbol(&self, m: SymbolIndex) -> Result<Vec<Complex64>> {
        let mut out = vec![Complex64::default(); self.len()];
        self.modulate_into(m, &mut out)?;
        Ok(out)
    }

    /// Writes the chirp for symbol `m` into `out`, which must hold exactly `M` samples.
    pub fn modulate_into(&self, m: SymbolIndex, out: &mut [Complex64]) -> Result<()> {
        let len = self.len();
        check_len(len, out.len())?;
        let shift = m.value() as usize;
        if shift >= len {
            return Err(Error::SymbolOutOfRange {
                value: m.value(),
                symbol_length: len,
            });
        }
        // out[n] = x0[n - m] for n >= m, x0[n - m + M] for n < m.
        out[..shift].copy_from_slice(&self.samples[len - shift..]);
        out[shift..].copy_from_slice(&self.samples[..len - shift]);
        Ok(())
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, actual })
    }
}

/// `y[n] = r[n] conj(x0[n])`.
pub fn dechirp(received: &[Complex64], table: &ChirpTable) -> Result<Vec<Complex64>> {
    check_len(table.len(), received.len())?;
    Ok(received
        .iter()
        .zip(table.samples())
        .map(|(r, x)| r * x.conj())
        .collect())
}

/// Outcome of demodulating one symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct DemodDecision {
    pub symbol: SymbolIndex,
    pub peak_magnitude: f64,
    /// `|Y[k]|` indexed by decoded symbol value (already bin-remapped).
    pub spectrum_magnitudes: Option<Vec<f64>>,
}

/// Reusable demodulator holding an FFT plan and scratch space.
///
/// With the forward kernel `exp(-j 2 pi n k / M)` the dechirped tone of symbol
/// `m` lands in bin `(M - m) mod M`; decisions are reported after mapping bins
/// back to symbol values so the decoded index equals the transmitted one.
pub struct Demodulator {
    table: Arc<ChirpTable>,
    fft: Arc<dyn Fft<f64>>,
    buffer: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl fmt::Debug for Demodulator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Demodulator")
            .field("spreading_factor", &self.table.spreading_factor())
            .finish_non_exhaustive()
    }
}

impl Clone for Demodulator {
    fn clone(&self) -> Self {
        Self::with_fft(self.table.clone(), self.fft.clone())
    }
}

impl Demodulator {
    pub fn new(table: Arc<ChirpTable>) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(table.len());
        Self::with_fft(table, fft)
    }

    /// Shares an already planned forward FFT of length `M`.
    pub fn with_fft(table: Arc<ChirpTable>, fft: Arc<dyn Fft<f64>>) -> Self {
        assert_eq!(fft.len(), table.len(), "FFT length must equal symbol length");
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        Self {
            buffer: vec![Complex64::default(); table.len()],
            table,
            fft,
            scratch,
        }
    }

    pub fn table(&self) -> &Arc<ChirpTable> {
        &self.table
    }

    /// Compensates with `conj(estimate)`, dechirps and transforms into the
    /// internal buffer. Returns the raw DFT output `Y[k]`.
    fn transform(&mut self, received: &[Complex64], estimate: &[Complex64]) -> Result<&[Complex64]> {
        let len = self.table.len();
        check_len(len, received.len())?;
        check_len(len, estimate.len())?;
        for (((y, r), h), x) in self
            .buffer
            .iter_mut()
            .zip(received)
            .zip(estimate)
            .zip(self.table.samples())
        {
            *y = h.conj() * r * x.conj();
        }
        self.fft.process_with_scratch(&mut self.buffer, &mut self.scratch);
        Ok(&self.buffer)
    }

    /// Hard decision only; no allocation.
    pub fn decide(&mut self, received: &[Complex64], estimate: &[Complex64]) -> Result<(SymbolIndex, f64)> {
        let spectrum = self.transform(received, estimate)?;
        let len = spectrum.len();
        let mut best = 0usize;
        let mut best_power = spectrum[0].norm_sqr();
        // Symbol s lives in bin (M - s) mod M; scanning s upwards keeps the
        // smallest symbol on ties.
        for s in 1..len {
            let p = spectrum[len - s].norm_sqr();
            if p > best_power {
                best_power = p;
                best = s;
            }
        }
        Ok((SymbolIndex(best as u32), best_power.sqrt()))
    }

    /// Full decision including the magnitude spectrum.
    pub fn demodulate(&mut self, received: &[Complex64], estimate: &[Complex64]) -> Result<DemodDecision> {
        let spectrum = self.transform(received, estimate)?;
        let len = spectrum.len();
        let magnitudes: Vec<f64> = (0..len).map(|s| spectrum[(len - s) % len].norm()).collect();
        let (best, peak) =
            magnitudes.iter().enumerate().fold(
                (0usize, f64::NEG_INFINITY),
                |acc, (s, &v)| if v > acc.1 { (s, v) } else { acc },
            );
        Ok(DemodDecision {
            symbol: SymbolIndex(best as u32),
            peak_magnitude: peak,
            spectrum_magnitudes: Some(magnitudes),
        })
    }
}

/// One-shot demodulation of a single symbol block.
///
/// Pass an all-ones `estimate` for a plain AWGN receiver.
pub fn demodulate(received: &[Complex64], estimate: &[Complex64], table: &ChirpTable) -> Result<DemodDecision> {
    Demodulator::new(Arc::new(table.clone())).demodulate(received, estimate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(sf: u32) -> ChirpTable {
        basic_chirp(&ModemParams::with_default_bandwidth(sf).unwrap())
    }

    fn ones(len: usize) -> Vec<Complex64> {
        vec![Complex64::new(1.0, 0.0); len]
    }

    // Direct O(M^2) DFT with kernel exp(-j 2 pi n k / M).
    fn reference_dft(x: &[Complex64]) -> Vec<Complex64> {
        let m = x.len();
        (0..m)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(n, v)| v * Complex64::from_polar(1.0, -TAU * ((n * k) % m) as f64 / m as f64))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn params_derived_quantities() {
        let p = ModemParams::with_default_bandwidth(12).unwrap();
        assert_eq!(p.symbol_length(), 4096);
        assert_eq!(p.symbol_duration_s(), 4096.0 / 125_000.0);
        assert_eq!(p.sample_interval_s(), 8e-6);
        assert!(ModemParams::new(1, 125e3).is_err());
        assert!(ModemParams::new(17, 125e3).is_err());
        assert!(ModemParams::new(7, 0.0).is_err());
        assert!(ModemParams::new(7, f64::NAN).is_err());
    }

    #[test]
    fn basic_chirp_values() {
        let t = table(7);
        assert_eq!(t.len(), 128);
        assert_eq!(t.samples()[0], Complex64::new(1.0, 0.0));
        for x in t.samples() {
            assert!((x.norm() - 1.0).abs() < 1e-12);
        }
        // exp(j 2 pi (1/256 - 1/2)), evaluated at 30 digits.
        let x1 = t.samples()[1];
        assert!((x1.re - -0.999_698_818_696_204_2).abs() < 1e-15);
        assert!((x1.im - -0.024_541_228_522_912_288).abs() < 1e-15);
    }

    #[test]
    fn chirp_matches_naive_phase_formula() {
        let t = table(9);
        let m = t.len() as f64;
        for (n, x) in t.samples().iter().enumerate() {
            let n = n as f64;
            let naive = Complex64::from_polar(1.0, TAU * (n * n / (2.0 * m) - n / 2.0));
            assert!((x - naive).norm() < 1e-9);
        }
    }

    #[test]
    fn modulate_shifts() {
        let t = table(7);
        let m = t.len();
        assert_eq!(t.modulate_symbol(t.symbol(0).unwrap()).unwrap(), t.samples());
        let s1 = t.modulate_symbol(t.symbol(1).unwrap()).unwrap();
        assert_eq!(s1[0], t.samples()[m - 1]);
        assert!(t.symbol(m as u32).is_err());

        // Delaying symbol k by one more sample gives symbol k + 1.
        for k in 0..m {
            let cur = t.modulate_symbol(t.symbol(k as u32).unwrap()).unwrap();
            let next = t.modulate_symbol(t.symbol(((k + 1) % m) as u32).unwrap()).unwrap();
            for n in 0..m {
                assert_eq!(next[(n + 1) % m], cur[n]);
            }
        }
    }

    #[test]
    fn modulate_into_rejects_wrong_length() {
        let t = table(7);
        let mut short = vec![Complex64::default(); 5];
        assert!(matches!(
            t.modulate_into(t.symbol(3).unwrap(), &mut short),
            Err(Error::LengthMismatch {
                expected: 128,
                actual: 5
            })
        ));
    }

    #[test]
    fn dechirp_basic_cases() {
        let t = table(7);
        let y = dechirp(t.samples(), &t).unwrap();
        for v in &y {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
        let zeros = vec![Complex64::default(); 128];
        assert!(dechirp(&zeros, &t).unwrap().iter().all(|v| *v == Complex64::default()));
        assert!(dechirp(&zeros[..10], &t).is_err());
    }

    #[test]
    fn dechirped_symbol_is_single_tone() {
        let t = table(7);
        let m = t.len();
        for sym in 0..m {
            let y = dechirp(&t.modulate_symbol(t.symbol(sym as u32).unwrap()).unwrap(), &t).unwrap();
            assert!(y.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
            let spec = reference_dft(&y);
            let big: Vec<usize> = (0..m).filter(|&k| spec[k].norm() > 1e-6 * m as f64).collect();
            assert_eq!(big, vec![(m - sym) % m]);
            assert!((spec[(m - sym) % m].norm() - m as f64).abs() < 1e-9 * m as f64);
        }
    }

    #[test]
    fn fast_path_agrees_with_reference_dft() {
        let t = Arc::new(table(8));
        let mut demod = Demodulator::new(t.clone());
        let rx: Vec<Complex64> = (0..t.len())
            .map(|n| Complex64::new((n as f64 * 0.37).sin(), (n as f64 * 1.3).cos() * 0.5))
            .collect();
        let fast = demod
            .demodulate(&rx, &ones(t.len()))
            .unwrap()
            .spectrum_magnitudes
            .unwrap();
        let slow = reference_dft(&dechirp(&rx, &t).unwrap());
        let m = t.len();
        for s in 0..m {
            let want = slow[(m - s) % m].norm();
            assert!((fast[s] - want).abs() <= 1e-9 * want.max(1.0));
        }
        // Parseval with the unnormalised forward transform.
        let y = dechirp(&rx, &t).unwrap();
        let time: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        let freq: f64 = fast.iter().map(|v| v * v).sum::<f64>() / m as f64;
        assert!((time - freq).abs() <= 1e-9 * time);
    }

    #[test]
    fn noiseless_round_trip_with_gains() {
        let t = table(7);
        let m = t.len();
        let gains = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.3, -2.0),
            Complex64::new(-1e-3, 4e-4),
            Complex64::from_polar(7.5, 2.2),
        ];
        for &h0 in &gains {
            for sym in 0..m {
                let tx = t.modulate_symbol(t.symbol(sym as u32).unwrap()).unwrap();
                let rx: Vec<_> = tx.iter().map(|x| h0 * x).collect();
                let d = demodulate(&rx, &vec![h0; m], &t).unwrap();
                assert_eq!(d.symbol.value() as usize, sym);
                let peak = h0.norm_sqr() * m as f64;
                assert!((d.peak_magnitude - peak).abs() < 1e-9 * peak);
            }
        }
    }

    #[test]
    fn positive_scaling_preserves_decision() {
        let t = table(7);
        let rx: Vec<Complex64> = t
            .modulate_symbol(t.symbol(17).unwrap())
            .unwrap()
            .iter()
            .enumerate()
            .map(|(n, x)| x + Complex64::new((n as f64).sin(), (n as f64 * 0.7).cos()) * 0.8)
            .collect();
        let base = demodulate(&rx, &ones(128), &t).unwrap().symbol;
        for c in [1e-6, 0.5, 3.0, 1e6] {
            let scaled: Vec<_> = rx.iter().map(|x| x * c).collect();
            assert_eq!(demodulate(&scaled, &ones(128), &t).unwrap().symbol, base);
        }
    }

    #[test]
    fn ties_break_toward_smallest_symbol() {
        let t = Arc::new(table(7));
        let mut demod = Demodulator::new(t);
        // All-zero input: every bin ties at zero.
        let zeros = vec![Complex64::default(); 128];
        let (s, peak) = demod.decide(&zeros, &ones(128)).unwrap();
        assert_eq!((s.value(), peak), (0, 0.0));
        assert_eq!(demod.demodulate(&zeros, &ones(128)).unwrap().symbol.value(), 0);
    }

    #[test]
    fn length_mismatch_rejected() {
        let t = table(7);
        assert!(demodulate(&ones(127), &ones(128), &t).is_err());
        assert!(demodulate(&ones(128), &ones(64), &t).is_err());
    }
}
