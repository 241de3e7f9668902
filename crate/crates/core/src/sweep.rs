//! Experiment grids: TOML configuration, grid expansion and CSV output.
//!
//! A sweep is the Cartesian product of spreading factors, payload sizes,
//! covariance parameters and SNRs. Rows are written in a fixed order with the
//! chosen sweep axis varying fastest, one CSV line per grid point, flushed as
//! each point completes. Each point gets its own master seed derived from the
//! sweep seed and the point's coordinates, so a point's result does not
//! depend on which other points share the grid.
//!
//! ```toml
//! spreading_factors = [7, 12]
//! payload_bytes = [1]
//! covariance_qs = [1.0, 0.99999, 0.99997, 0.99995, 0.99994]
//! snr_db = { start = -30.0, stop = 5.0, step = 1.0 }   # or an explicit list
//! trials = 50000                                       # optional
//! master_seed = 1                                      # optional
//! channel_kind = "correlated_rayleigh"                 # or "awgn"
//! sweep_axis = "snr"                                   # "snr" | "q" | "payload"
//! bandwidth_hz = 125000.0                              # optional
//! ```

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modem::{DEFAULT_BANDWIDTH_HZ, LORA_SPREADING_FACTORS};
use crate::rng::derive_seed;
use crate::simulator::{ChannelKind, FerEstimate, Simulator, TrialPoint, DEFAULT_TRIALS};

/// Exact CSV header line.
pub const CSV_HEADER: [&str; 12] = [
    "spreading_factor",
    "payload_bytes",
    "covariance_q",
    "snr_db",
    "trials",
    "frame_errors",
    "fer",
    "ci_low",
    "ci_high",
    "symbol_errors",
    "symbols_total",
    "master_seed",
];

/// Bumped whenever the CSV columns or their formatting change.
pub const CSV_SCHEMA_VERSION: u32 = 1;

const MAX_GRID_VALUES: usize = 100_000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot resume: {0}")]
    Resume(String),
    #[error(transparent)]
    Simulation(#[from] crate::error::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SweepError + '_ {
    move |source| SweepError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Which grid variable forms the x-axis of the output table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    #[default]
    Snr,
    Q,
    Payload,
}

/// SNR values in dB: an explicit list or an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SnrGrid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl SnrGrid {
    pub fn values(&self) -> Result<Vec<f64>, ConfigError> {
        match self {
            SnrGrid::List(v) => Ok(v.clone()),
            &SnrGrid::Range { start, stop, step } => {
                if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
                    return Err(invalid("snr_db", "range bounds and step must be finite"));
                }
                if step <= 0.0 {
                    return Err(invalid("snr_db", format!("step must be positive, got {step}")));
                }
                if stop < start {
                    return Err(invalid("snr_db", format!("stop {stop} is below start {start}")));
                }
                let span = (stop - start) / step;
                if span >= MAX_GRID_VALUES as f64 {
                    return Err(invalid("snr_db", "range expands to too many values"));
                }
                let count = (span + 1e-9).floor() as usize + 1;
                // Round away accumulated binary error so 0.1 steps print cleanly.
                Ok((0..count)
                    .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9 + 0.0)
                    .collect())
            }
        }
    }
}

fn default_trials() -> u64 {
    DEFAULT_TRIALS
}

fn default_seed() -> u64 {
    1
}

fn default_channel() -> ChannelKind {
    ChannelKind::CorrelatedRayleigh
}

fn default_bandwidth() -> f64 {
    DEFAULT_BANDWIDTH_HZ
}

/// Validated sweep description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub spreading_factors: Vec<u32>,
    pub payload_bytes: Vec<usize>,
    pub covariance_qs: Vec<f64>,
    pub snr_db: SnrGrid,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default = "default_channel")]
    pub channel_kind: ChannelKind,
    #[serde(default)]
    pub sweep_axis: SweepAxis,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
}

/// Parses and validates a TOML sweep configuration.
pub fn parse_config(text: &str) -> Result<SweepConfig, ConfigError> {
    let config: SweepConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

impl SweepConfig {
    pub fn from_path(path: &Path) -> Result<Self, SweepError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Ok(parse_config(&text)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.spreading_factors.is_empty() {
            return Err(invalid("spreading_factors", "list is empty"));
        }
        if let Some(sf) = self
            .spreading_factors
            .iter()
            .find(|sf| !LORA_SPREADING_FACTORS.contains(sf))
        {
            return Err(invalid(
                "spreading_factors",
                format!(
                    "{sf} outside LoRa range {}..={}",
                    LORA_SPREADING_FACTORS.start(),
                    LORA_SPREADING_FACTORS.end()
                ),
            ));
        }
        if self.payload_bytes.is_empty() {
            return Err(invalid("payload_bytes", "list is empty"));
        }
        if self.payload_bytes.contains(&0) {
            return Err(invalid("payload_bytes", "payload sizes must be at least 1 byte"));
        }
        if self.covariance_qs.is_empty() {
            return Err(invalid("covariance_qs", "list is empty"));
        }
        if let Some(q) = self.covariance_qs.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            return Err(invalid("covariance_qs", format!("{q} outside [0, 1]")));
        }
        let snrs = self.snr_db.values()?;
        if snrs.is_empty() {
            return Err(invalid("snr_db", "list is empty"));
        }
        if let Some(s) = snrs.iter().find(|s| !s.is_finite()) {
            return Err(invalid("snr_db", format!("{s} is not finite")));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return Err(invalid(
                "bandwidth_hz",
                format!("must be positive, got {}", self.bandwidth_hz),
            ));
        }
        Ok(())
    }

    /// Expands the grid in output order: spreading factor, payload, q, SNR,
    /// with the sweep axis moved innermost.
    pub fn points(&self) -> Result<Vec<TrialPoint>, ConfigError> {
        self.validate()?;
        let snrs = self.snr_db.values()?;
        let mut out = Vec::with_capacity(self.point_count()?);
        let mut push = |sf: u32, b: usize, q: f64, snr: f64| {
            let mut p = TrialPoint::new(sf, b, q, snr, self.channel_kind).with_trials(self.trials);
            p.bandwidth_hz = self.bandwidth_hz;
            p.master_seed = point_seed(self.master_seed, &p);
            out.push(p);
        };
        for &sf in &self.spreading_factors {
            match self.sweep_axis {
                SweepAxis::Snr => {
                    for &b in &self.payload_bytes {
                        for &q in &self.covariance_qs {
                            for &s in &snrs {
                                push(sf, b, q, s);
                            }
                        }
                    }
                }
                SweepAxis::Q => {
                    for &b in &self.payload_bytes {
                        for &s in &snrs {
                            for &q in &self.covariance_qs {
                                push(sf, b, q, s);
                            }
                        }
                    }
                }
                SweepAxis::Payload => {
                    for &q in &self.covariance_qs {
                        for &s in &snrs {
                            for &b in &self.payload_bytes {
                                push(sf, b, q, s);
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn point_count(&self) -> Result<usize, ConfigError> {
        Ok(self.spreading_factors.len()
            * self.payload_bytes.len()
            * self.covariance_qs.len()
            * self.snr_db.values()?.len())
    }
}

/// Per-point master seed derived from the sweep seed and the point's coordinates.
pub fn point_seed(sweep_seed: u64, point: &TrialPoint) -> u64 {
    derive_seed(
        sweep_seed,
        &[
            u64::from(point.spreading_factor),
            point.payload_bytes as u64,
            (point.covariance_q + 0.0).to_bits(),
            (point.snr_db + 0.0).to_bits(),
            point.channel_kind as u64,
        ],
    )
}

/// Fixed-point decimal with six significant digits; zero prints as `0`.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{x:.5e}");
    let exp: i32 = sci.rsplit_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    let decimals = (5 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub spreading_factor: u32,
    pub payload_bytes: usize,
    pub covariance_q: f64,
    pub snr_db: f64,
    pub trials: u64,
    pub frame_errors: u64,
    pub fer: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub symbol_errors: u64,
    pub symbols_total: u64,
    pub master_seed: u64,
}

impl ResultRow {
    pub fn new(point: &TrialPoint, est: &FerEstimate) -> Self {
        Self {
            spreading_factor: point.spreading_factor,
            payload_bytes: point.payload_bytes,
            covariance_q: point.covariance_q,
            snr_db: point.snr_db,
            trials: est.trials,
            frame_errors: est.frame_errors,
            fer: est.fer,
            ci_low: est.ci_low,
            ci_high: est.ci_high,
            symbol_errors: est.symbol_errors,
            symbols_total: est.symbols_total,
            master_seed: point.master_seed,
        }
    }

    pub fn to_record(&self) -> [String; 12] {
        [
            self.spreading_factor.to_string(),
            self.payload_bytes.to_string(),
            self.covariance_q.to_string(),
            self.snr_db.to_string(),
            self.trials.to_string(),
            self.frame_errors.to_string(),
            format_sig6(self.fer),
            format_sig6(self.ci_low),
            format_sig6(self.ci_high),
            self.symbol_errors.to_string(),
            self.symbols_total.to_string(),
            self.master_seed.to_string(),
        ]
    }

    /// Parses a record written by [`to_record`](Self::to_record).
    pub fn from_record(record: &csv::StringRecord) -> Result<Self, String> {
        if record.len() != CSV_HEADER.len() {
            return Err(format!("expected {} fields, found {}", CSV_HEADER.len(), record.len()));
        }
        fn field<T: std::str::FromStr>(r: &csv::StringRecord, i: usize) -> Result<T, String> {
            r[i].parse()
                .map_err(|_| format!("bad `{}` value {:?}", CSV_HEADER[i], &r[i]))
        }
        Ok(Self {
            spreading_factor: field(record, 0)?,
            payload_bytes: field(record, 1)?,
            covariance_q: field(record, 2)?,
            snr_db: field(record, 3)?,
            trials: field(record, 4)?,
            frame_errors: field(record, 5)?,
            fer: field(record, 6)?,
            ci_low: field(record, 7)?,
            ci_high: field(record, 8)?,
            symbol_errors: field(record, 9)?,
            symbols_total: field(record, 10)?,
            master_seed: field(record, 11)?,
        })
    }

    fn same_point(&self, p: &TrialPoint) -> bool {
        self.spreading_factor == p.spreading_factor
            && self.payload_bytes == p.payload_bytes
            && self.covariance_q == p.covariance_q
            && self.snr_db == p.snr_db
            && self.trials == p.trials
            && self.master_seed == p.master_seed
    }
}

/// Reads every result row of a sweep CSV, checking the header.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, SweepError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::Reader::from_reader(file);
    let header = reader.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(SweepError::Resume(format!(
            "unexpected CSV header in {}",
            path.display()
        )));
    }
    reader
        .records()
        .map(|r| ResultRow::from_record(&r?).map_err(SweepError::Resume))
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses all available hardware threads.
    pub workers: Option<usize>,
    /// Keep rows already present in the output and compute only the rest.
    pub resume: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepMetadata {
    pub schema_version: u32,
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub config: SweepConfig,
    pub master_seed: u64,
    pub workers: usize,
    pub points: usize,
    pub resumed_points: usize,
    pub started_unix_s: u64,
    pub wall_time_s: f64,
    pub csv: PathBuf,
}

/// Sidecar path next to the CSV: `results.csv` -> `results.csv.meta.json`.
pub fn metadata_path(csv_path: &Path) -> PathBuf {
    let mut name = csv_path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Evaluates every grid point and writes the CSV plus metadata sidecar.
///
/// `on_row` is called after each computed row is flushed, with the row and
/// the wall time the point took.
pub fn run_sweep(
    config: &SweepConfig,
    out: &Path,
    options: &RunOptions,
    on_row: &mut dyn FnMut(&ResultRow, std::time::Duration),
) -> Result<SweepMetadata, SweepError> {
    let points = config.points()?;
    let started = Instant::now();
    let started_unix_s = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());

    let mut skip = 0;
    let file = if options.resume && out.exists() {
        let done = read_results(out)?;
        if done.len() > points.len() {
            return Err(SweepError::Resume("existing CSV has more rows than the grid".into()));
        }
        if let Some(i) = done.iter().zip(&points).position(|(row, p)| !row.same_point(p)) {
            return Err(SweepError::Resume(format!(
                "row {} does not match the configured grid",
                i + 1
            )));
        }
        skip = done.len();
        OpenOptions::new().append(true).open(out).map_err(io_err(out))?
    } else {
        File::create(out).map_err(io_err(out))?
    };

    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if skip == 0 {
        writer.write_record(CSV_HEADER)?;
        writer.flush().map_err(io_err(out))?;
    }

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = options.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build()?;
    let workers = pool.current_num_threads();

    for point in &points[skip..] {
        let t0 = Instant::now();
        let sim = Simulator::new(*point)?;
        let est = pool.install(|| sim.estimate_fer());
        let row = ResultRow::new(point, &est);
        writer.write_record(row.to_record())?;
        writer.flush().map_err(io_err(out))?;
        on_row(&row, t0.elapsed());
    }
    drop(writer);

    let meta = SweepMetadata {
        schema_version: CSV_SCHEMA_VERSION,
        tool: env!("CARGO_PKG_NAME"),
        tool_version: env!("CARGO_PKG_VERSION"),
        config: config.clone(),
        master_seed: config.master_seed,
        workers,
        points: points.len(),
        resumed_points: skip,
        started_unix_s,
        wall_time_s: started.elapsed().as_secs_f64(),
        csv: out.to_path_buf(),
    };
    let meta_path = metadata_path(out);
    let mut f = File::create(&meta_path).map_err(io_err(&meta_path))?;
    serde_json::to_writer_pretty(&mut f, &meta).map_err(|e| SweepError::Io {
        path: meta_path.clone(),
        source: e.into(),
    })?;
    writeln!(f).map_err(io_err(&meta_path))?;
    Ok(meta)
}
