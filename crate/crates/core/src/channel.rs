//! AWGN and exponentially correlated Rayleigh fading.
//!
//! Fading gains follow the first-order Gauss-Markov recursion
//!
//! ```text
//! h[0] ~ CN(0, 1)
//! h[n] = q h[n-1] + sqrt(1 - q^2) v[n],   v[n] ~ CN(0, 1) i.i.d.
//! ```
//!
//! which is stationary with unit power and autocovariance `q^|m - n|`.
//! Noise `w ~ CN(0, sigma^2)` puts `sigma^2 / 2` on each real component.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Fading correlation and noise level of a channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    covariance_q: f64,
    noise_sigma: f64,
}

impl ChannelParams {
    pub fn new(covariance_q: f64, noise_sigma: f64) -> Result<Self> {
        check_q(covariance_q)?;
        check_sigma(noise_sigma)?;
        Ok(Self {
            covariance_q,
            noise_sigma,
        })
    }

    pub fn covariance_q(&self) -> f64 {
        self.covariance_q
    }

    /// Total complex noise standard deviation, `E|w|^2 = sigma^2`.
    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }
}

pub(crate) fn check_q(q: f64) -> Result<()> {
    if (0.0..=1.0).contains(&q) {
        Ok(())
    } else {
        Err(Error::Covariance(q))
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma >= 0.0 {
        Ok(())
    } else {
        Err(Error::NoiseSigma(sigma))
    }
}

/// Draws one `CN(0, 1)` sample.
#[inline]
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// `count` i.i.d. `CN(0, sigma^2)` samples.
pub fn awgn<R: Rng + ?Sized>(count: usize, sigma: f64, rng: &mut R) -> Result<Vec<Complex64>> {
    check_sigma(sigma)?;
    Ok((0..count).map(|_| complex_gaussian(rng) * sigma).collect())
}

/// Adds `CN(0, sigma^2)` noise in place. `sigma == 0` leaves the input untouched
/// and draws nothing.
pub fn add_awgn<R: Rng + ?Sized>(samples: &mut [Complex64], sigma: f64, rng: &mut R) {
    if sigma == 0.0 {
        return;
    }
    for s in samples {
        *s += complex_gaussian(rng) * sigma;
    }
}

/// Per-sample channel gains `h[n]` of one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FadingTrace {
    gains: Vec<Complex64>,
}

impl FadingTrace {
    /// Wraps explicit gains, e.g. a constant trace for tests.
    pub fn from_gains(gains: Vec<Complex64>) -> Self {
        Self { gains }
    }

    pub fn constant(gain: Complex64, len: usize) -> Self {
        Self { gains: vec![gain; len] }
    }

    pub fn gains(&self) -> &[Complex64] {
        &self.gains
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn into_gains(self) -> Vec<Complex64> {
        self.gains
    }

    /// Regenerates the trace in place with a new realisation of length `len`,
    /// reusing the allocation.
    pub fn regenerate<R: Rng + ?Sized>(&mut self, len: usize, q: f64, rng: &mut R) -> Result<()> {
        if len == 0 {
            return Err(Error::EmptyTrace);
        }
        let mut process = FadingProcess::new(q, rng)?;
        self.gains.clear();
        self.gains.reserve(len);
        self.gains.push(process.current());
        for _ in 1..len {
            self.gains.push(process.advance(rng));
        }
        Ok(())
    }
}

/// Streaming form of the Gauss-Markov fading recursion.
///
/// Holds the most recent gain; [`advance`](Self::advance) steps one sample.
/// For `q = 1` no innovations are drawn and the gain never changes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingProcess {
    q: f64,
    innovation: f64,
    current: Complex64,
}

impl FadingProcess {
    /// Starts the process, drawing `h[0] ~ CN(0, 1)`.
    pub fn new<R: Rng + ?Sized>(q: f64, rng: &mut R) -> Result<Self> {
        check_q(q)?;
        Ok(Self {
            q,
            innovation: (1.0 - q * q).sqrt(),
            current: complex_gaussian(rng),
        })
    }

    pub fn current(&self) -> Complex64 {
        self.current
    }

    #[inline]
    pub fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Complex64 {
        if self.innovation != 0.0 {
            self.current = self.current * self.q + complex_gaussian(rng) * self.innovation;
        }
        self.current
    }
}

/// Generates an exponentially correlated Rayleigh trace of `len` samples.
pub fn generate_fading<R: Rng + ?Sized>(len: usize, q: f64, rng: &mut R) -> Result<FadingTrace> {
    let mut trace = FadingTrace::default();
    trace.regenerate(len, q, rng)?;
    Ok(trace)
}

/// `r[n] = h[n] clean[n] + w[n]` with fresh `CN(0, sigma^2)` noise.
pub fn apply_channel<R: Rng + ?Sized>(
    clean: &[Complex64],
    trace: &FadingTrace,
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if clean.len() != trace.len() {
        return Err(Error::LengthMismatch {
            expected: trace.len(),
            actual: clean.len(),
        });
    }
    check_sigma(sigma)?;
    let mut out: Vec<Complex64> = clean.iter().zip(trace.gains()).map(|(x, h)| h * x).collect();
    add_awgn(&mut out, sigma, rng);
    Ok(out)
}
