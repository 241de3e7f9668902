//! Monte-Carlo frame-error-rate estimation.
//!
//! One trial transmits one frame of random payload bytes through the channel
//! and demodulates every symbol. Trials draw from independent counter-based
//! streams keyed by `(master_seed, trial_index)`, so aggregate counts do not
//! depend on worker count or scheduling.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::channel::{check_q, complex_gaussian, FadingProcess};
use crate::error::{Error, Result};
use crate::framing::{bytes_to_symbols_into, symbols_per_frame};
use crate::modem::{basic_chirp, ChirpTable, Demodulator, ModemParams, SymbolIndex, DEFAULT_BANDWIDTH_HZ};
use crate::rng::{trial_stream, TrialRng};
use crate::stats::{wilson_interval, Z_95};

/// Frames simulated per operating point unless overridden.
pub const DEFAULT_TRIALS: u64 = 50_000;

/// Trials handed to a worker at a time.
const CHUNK: u64 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Awgn,
    CorrelatedRayleigh,
}

impl ChannelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChannelKind::Awgn => "awgn",
            ChannelKind::CorrelatedRayleigh => "correlated_rayleigh",
        }
    }
}

/// How the receiver forms its channel estimate `h_hat[n]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimateRule {
    /// `h_hat[n] = h[0]` for the whole frame.
    StartOfFrame,
    /// `h_hat[n] = h[n]`: exact per-sample knowledge, a diagnostic bound.
    Genie,
}

/// One operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialPoint {
    pub spreading_factor: u32,
    pub payload_bytes: usize,
    pub covariance_q: f64,
    /// Per-bit SNR in dB; `sigma^2 = 1 / (S 10^(snr/10))`.
    pub snr_db: f64,
    pub trials: u64,
    pub master_seed: u64,
    pub channel_kind: ChannelKind,
    pub bandwidth_hz: f64,
}

impl TrialPoint {
    pub fn new(
        spreading_factor: u32,
        payload_bytes: usize,
        covariance_q: f64,
        snr_db: f64,
        channel_kind: ChannelKind,
    ) -> Self {
        Self {
            spreading_factor,
            payload_bytes,
            covariance_q,
            snr_db,
            trials: DEFAULT_TRIALS,
            master_seed: 0,
            channel_kind,
            bandwidth_hz: DEFAULT_BANDWIDTH_HZ,
        }
    }

    pub fn awgn(spreading_factor: u32, payload_bytes: usize, snr_db: f64) -> Self {
        Self::new(spreading_factor, payload_bytes, 1.0, snr_db, ChannelKind::Awgn)
    }

    pub fn rayleigh(spreading_factor: u32, payload_bytes: usize, covariance_q: f64, snr_db: f64) -> Self {
        Self::new(
            spreading_factor,
            payload_bytes,
            covariance_q,
            snr_db,
            ChannelKind::CorrelatedRayleigh,
        )
    }

    pub fn with_trials(mut self, trials: u64) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    pub fn validate(&self) -> Result<ModemParams> {
        let params = ModemParams::new(self.spreading_factor, self.bandwidth_hz)?;
        if self.payload_bytes == 0 {
            return Err(Error::EmptyPayload);
        }
        check_q(self.covariance_q)?;
        // +inf dB is a noiseless link; NaN and -inf are meaningless.
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::Snr(self.snr_db));
        }
        if self.trials == 0 {
            return Err(Error::NoTrials);
        }
        Ok(params)
    }

    /// `sigma^2 = 1 / (S * SNR)`.
    pub fn noise_variance(&self) -> f64 {
        1.0 / (self.spreading_factor as f64 * 10f64.powf(self.snr_db / 10.0))
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_variance().sqrt()
    }

    pub fn symbols_per_frame(&self) -> usize {
        symbols_per_frame(self.payload_bytes, self.spreading_factor)
    }
}

/// Result of one simulated frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameOutcome {
    pub frame_ok: bool,
    pub transmitted: Vec<SymbolIndex>,
    pub decisions: Vec<SymbolIndex>,
}

impl FrameOutcome {
    pub fn symbol_ok(&self) -> impl Iterator<Item = bool> + '_ {
        self.transmitted.iter().zip(&self.decisions).map(|(a, b)| a == b)
    }

    pub fn symbol_errors(&self) -> usize {
        self.symbol_ok().filter(|ok| !ok).count()
    }
}

/// Aggregated frame and symbol error counts with a 95% Wilson interval on FER.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FerEstimate {
    pub frame_errors: u64,
    pub trials: u64,
    pub fer: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub symbol_errors: u64,
    pub symbols_total: u64,
}

impl FerEstimate {
    pub fn from_counts(frame_errors: u64, trials: u64, symbol_errors: u64, symbols_total: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(frame_errors, trials, Z_95);
        let fer = if trials == 0 {
            0.0
        } else {
            frame_errors as f64 / trials as f64
        };
        Self {
            frame_errors,
            trials,
            fer,
            ci_low,
            ci_high,
            symbol_errors,
            symbols_total,
        }
    }

    pub fn ser(&self) -> f64 {
        if self.symbols_total == 0 {
            0.0
        } else {
            self.symbol_errors as f64 / self.symbols_total as f64
        }
    }

    /// True when the two 95% intervals do not overlap and `self` is lower.
    pub fn clearly_below(&self, other: &FerEstimate) -> bool {
        self.ci_high < other.ci_low
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counts {
    frame_errors: u64,
    symbol_errors: u64,
    symbols: u64,
}

impl std::ops::Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts {
            frame_errors: self.frame_errors + o.frame_errors,
            symbol_errors: self.symbol_errors + o.symbol_errors,
            symbols: self.symbols + o.symbols,
        }
    }
}

/// Per-worker scratch buffers.
#[derive(Debug, Clone)]
struct Workspace {
    payload: Vec<u8>,
    symbols: Vec<SymbolIndex>,
    received: Vec<Complex64>,
    gains: Vec<Complex64>,
    estimate: Vec<Complex64>,
    demod: Demodulator,
}

/// Simulation engine for one [`TrialPoint`]. Chirp table and FFT plan are
/// built once and shared read-only by all workers.
pub struct Simulator {
    point: TrialPoint,
    table: Arc<ChirpTable>,
    fft: Arc<dyn Fft<f64>>,
    sigma: f64,
    symbol_diagnostics: bool,
}

impl std::fmt::Debug for Simulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulator")
            .field("point", &self.point)
            .field("sigma", &self.sigma)
            .field("symbol_diagnostics", &self.symbol_diagnostics)
            .finish_non_exhaustive()
    }
}

impl Simulator {
    pub fn new(point: TrialPoint) -> Result<Self> {
        let params = point.validate()?;
        let table = Arc::new(basic_chirp(&params));
        let fft = FftPlanner::new().plan_fft_forward(table.len());
        Ok(Self {
            point,
            table,
            fft,
            sigma: point.noise_sigma(),
            symbol_diagnostics: true,
        })
    }

    /// With diagnostics off a frame stops at its first symbol error. FER is
    /// unchanged but symbol counts then cover only the symbols demodulated.
    pub fn with_symbol_diagnostics(mut self, enabled: bool) -> Self {
        self.symbol_diagnostics = enabled;
        self
    }

    pub fn point(&self) -> &TrialPoint {
        &self.point
    }

    pub fn table(&self) -> &Arc<ChirpTable> {
        &self.table
    }

    fn workspace(&self) -> Workspace {
        let m = self.table.len();
        Workspace {
            payload: vec![0; self.point.payload_bytes],
            symbols: Vec::with_capacity(self.point.symbols_per_frame()),
            received: vec![Complex64::default(); m],
            gains: vec![Complex64::default(); m],
            estimate: vec![Complex64::default(); m],
            demod: Demodulator::with_fft(self.table.clone(), self.fft.clone()),
        }
    }

    /// Simulates frame `trial_index`, calling `on_symbol(k, decisions)` after
    /// each symbol block with one decision per rule in `rules`. Stops early if
    /// `on_symbol` returns false.
    ///
    /// Draw order per frame: payload bytes, `h[0]`, then per sample the fading
    /// innovation followed by the noise sample. Identical for every rule, so
    /// all rules see the same realisation.
    fn simulate_frame<const R: usize>(
        &self,
        ws: &mut Workspace,
        trial_index: u64,
        rules: [EstimateRule; R],
        mut on_symbol: impl FnMut(usize, SymbolIndex, [SymbolIndex; R]) -> bool,
    ) {
        let mut rng: TrialRng = trial_stream(self.point.master_seed, trial_index);
        rng.fill(&mut ws.payload[..]);
        bytes_to_symbols_into(&ws.payload, self.point.spreading_factor, &mut ws.symbols)
            .expect("validated payload and spreading factor");

        let m = self.table.len();
        let chirp = self.table.samples();
        let sigma = self.sigma;
        let one = Complex64::new(1.0, 0.0);
        let mut fading = match self.point.channel_kind {
            ChannelKind::CorrelatedRayleigh => {
                Some(FadingProcess::new(self.point.covariance_q, &mut rng).expect("validated q"))
            }
            ChannelKind::Awgn => None,
        };
        let start_estimate = fading.as_ref().map_or(one, FadingProcess::current);
        let mut first_sample = true;

        for k in 0..ws.symbols.len() {
            let sym = ws.symbols[k];
            let shift = sym.value() as usize;
            for n in 0..m {
                // x_m[n] = x0[(n - m) mod M]
                let x = chirp[(n + m - shift) & (m - 1)];
                let h = match fading.as_mut() {
                    Some(f) if first_sample => f.current(),
                    Some(f) => f.advance(&mut rng),
                    None => one,
                };
                first_sample = false;
                let mut r = h * x;
                if sigma != 0.0 {
                    r += complex_gaussian(&mut rng) * sigma;
                }
                ws.received[n] = r;
                ws.gains[n] = h;
            }

            let mut decisions = [sym; R];
            for (slot, rule) in decisions.iter_mut().zip(rules) {
                let estimate: &[Complex64] = match rule {
                    EstimateRule::StartOfFrame => {
                        ws.estimate.fill(start_estimate);
                        &ws.estimate
                    }
                    EstimateRule::Genie => &ws.gains,
                };
                *slot = ws
                    .demod
                    .decide(&ws.received, estimate)
                    .expect("buffers sized to symbol length")
                    .0;
            }
            if !on_symbol(k, sym, decisions) {
                break;
            }
        }
    }

    fn trial_with_rule(&self, ws: &mut Workspace, trial_index: u64, rule: EstimateRule) -> FrameOutcome {
        let mut decisions = Vec::with_capacity(self.point.symbols_per_frame());
        self.simulate_frame(ws, trial_index, [rule], |_, _, [d]| {
            decisions.push(d);
            true
        });
        let transmitted = ws.symbols.clone();
        FrameOutcome {
            frame_ok: transmitted == decisions,
            transmitted,
            decisions,
        }
    }

    /// One frame with the start-of-frame channel estimate.
    pub fn run_trial(&self, trial_index: u64) -> FrameOutcome {
        self.trial_with_rule(&mut self.workspace(), trial_index, EstimateRule::StartOfFrame)
    }

    /// One frame with exact per-sample channel knowledge.
    pub fn genie_receiver_trial(&self, trial_index: u64) -> FrameOutcome {
        self.trial_with_rule(&mut self.workspace(), trial_index, EstimateRule::Genie)
    }

    /// Both receivers on one shared realisation: `(start_of_frame, genie)`.
    pub fn paired_trial(&self, trial_index: u64) -> (FrameOutcome, FrameOutcome) {
        let mut ws = self.workspace();
        let mut sof = Vec::new();
        let mut genie = Vec::new();
        self.simulate_frame(
            &mut ws,
            trial_index,
            [EstimateRule::StartOfFrame, EstimateRule::Genie],
            |_, _, [a, b]| {
                sof.push(a);
                genie.push(b);
                true
            },
        );
        let tx = ws.symbols.clone();
        let outcome = |d: Vec<SymbolIndex>| FrameOutcome {
            frame_ok: d == tx,
            transmitted: tx.clone(),
            decisions: d,
        };
        (outcome(sof), outcome(genie))
    }

    fn count_trial(&self, ws: &mut Workspace, trial_index: u64, rule: EstimateRule) -> Counts {
        let mut c = Counts::default();
        let diagnostics = self.symbol_diagnostics;
        self.simulate_frame(ws, trial_index, [rule], |_, sym, [d]| {
            c.symbols += 1;
            if d != sym {
                c.symbol_errors += 1;
                c.frame_errors = 1;
                return diagnostics;
            }
            true
        });
        c
    }

    /// Runs all trials with the start-of-frame receiver on the current rayon pool.
    pub fn estimate_fer(&self) -> FerEstimate {
        self.estimate_fer_with(EstimateRule::StartOfFrame, &|_| {})
    }

    /// Runs all trials with `rule`; `progress` receives the number of trials
    /// finished by each completed chunk.
    pub fn estimate_fer_with(&self, rule: EstimateRule, progress: &(dyn Fn(u64) + Sync)) -> FerEstimate {
        let trials = self.point.trials;
        let chunks = trials.div_ceil(CHUNK);
        let totals = (0..chunks)
            .into_par_iter()
            .map_init(
                || self.workspace(),
                |ws, chunk| {
                    let lo = chunk * CHUNK;
                    let hi = (lo + CHUNK).min(trials);
                    let c = (lo..hi).fold(Counts::default(), |acc, i| acc + self.count_trial(ws, i, rule));
                    progress(hi - lo);
                    c
                },
            )
            .reduce(Counts::default, |a, b| a + b);
        FerEstimate::from_counts(totals.frame_errors, trials, totals.symbol_errors, totals.symbols)
    }
}

pub fn run_trial(point: &TrialPoint, trial_index: u64) -> Result<FrameOutcome> {
    Ok(Simulator::new(*point)?.run_trial(trial_index))
}

pub fn genie_receiver_trial(point: &TrialPoint, trial_index: u64) -> Result<FrameOutcome> {
    Ok(Simulator::new(*point)?.genie_receiver_trial(trial_index))
}

/// Estimates FER on the current rayon pool (global pool by default).
pub fn estimate_fer(point: &TrialPoint) -> Result<FerEstimate> {
    Ok(Simulator::new(*point)?.estimate_fer())
}

/// Estimates FER on a dedicated pool of `workers` threads.
pub fn estimate_fer_with_workers(point: &TrialPoint, workers: usize) -> Result<FerEstimate> {
    let sim = Simulator::new(*point)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool");
    Ok(pool.install(|| sim.estimate_fer()))
}
