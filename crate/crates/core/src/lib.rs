//! Monte-Carlo frame-error-rate simulation of LoRa chirp-spread-spectrum
//! links over AWGN and exponentially correlated Rayleigh fading.
//!
//! The pipeline is: payload bytes ([`framing`]) to CSS symbols ([`modem`]),
//! through a per-sample fading and noise channel ([`channel`]), into a
//! DFT-based receiver that compensates a start-of-frame channel estimate
//! ([`simulator`]). [`sweep`] expands experiment grids and writes CSV results.

pub mod channel;
pub mod error;
pub mod framing;
pub mod modem;
pub mod rng;
pub mod simulator;
pub mod stats;
pub mod sweep;

pub use channel::{apply_channel, awgn, generate_fading, ChannelParams, FadingProcess, FadingTrace};
pub use error::{Error, Result};
pub use framing::{bytes_to_symbols, frame_sample_count, symbols_per_frame, symbols_to_bytes, FramePayload};
pub use modem::{basic_chirp, dechirp, demodulate, ChirpTable, DemodDecision, Demodulator, ModemParams, SymbolIndex};
pub use simulator::{
    estimate_fer, estimate_fer_with_workers, genie_receiver_trial, run_trial, ChannelKind, EstimateRule, FerEstimate,
    FrameOutcome, Simulator, TrialPoint,
};
pub use sweep::{parse_config, run_sweep, ResultRow, RunOptions, SnrGrid, SweepAxis, SweepConfig};
