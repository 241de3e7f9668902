use thiserror::Error;

/// Errors raised by the modem, channel, framing and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("spreading factor {0} outside supported range {min}..={max}", min = crate::modem::MIN_SPREADING_FACTOR, max = crate::modem::MAX_SPREADING_FACTOR)]
    SpreadingFactor(u32),
    #[error("bandwidth must be positive and finite, got {0}")]
    Bandwidth(f64),
    #[error("symbol index {value} out of range for {symbol_length}-ary alphabet")]
    SymbolOutOfRange { value: u32, symbol_length: usize },
    #[error("length mismatch: expected {expected} samples, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("covariance parameter q must lie in [0, 1], got {0}")]
    Covariance(f64),
    #[error("noise sigma must be non-negative and finite, got {0}")]
    NoiseSigma(f64),
    #[error("fading trace length must be at least 1")]
    EmptyTrace,
    #[error("payload must contain at least one byte")]
    EmptyPayload,
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error("SNR must be finite, got {0} dB")]
    Snr(f64),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
