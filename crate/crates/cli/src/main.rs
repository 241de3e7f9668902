//! `simulate`: run a frame-error-rate sweep described by a TOML config.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use css_fer::sweep::{metadata_path, run_sweep, RunOptions, SweepConfig};

#[derive(Debug, Parser)]
#[command(
    name = "simulate",
    version,
    about = "Monte-Carlo FER sweep for LoRa CSS over correlated Rayleigh fading"
)]
struct Args {
    /// Sweep configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path; metadata goes to `<out>.meta.json`.
    #[arg(long)]
    out: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's frames per point.
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads (default: all hardware threads).
    #[arg(long)]
    workers: Option<usize>,
    /// Print one line per completed grid point.
    #[arg(long)]
    progress: bool,
    /// Keep rows already in `--out` and compute only the remaining points.
    #[arg(long)]
    resume: bool,
    /// Warn when a point's 95% upper bound exceeds three times this FER.
    #[arg(long)]
    target_fer: Option<f64>,
}

fn run(args: Args) -> Result<()> {
    let mut config =
        SweepConfig::from_path(&args.config).with_context(|| format!("loading {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    config.validate()?;
    if args.workers == Some(0) {
        anyhow::bail!("--workers must be at least 1");
    }

    let total = config.point_count()?;
    let options = RunOptions {
        workers: args.workers,
        resume: args.resume,
    };
    let mut done = 0usize;
    let mut on_row = |row: &css_fer::ResultRow, took: std::time::Duration| {
        done += 1;
        if args.progress {
            eprintln!(
                "[{done}/{total}] S={} B={} q={} snr={} dB: FER {} ({}/{}) [{}, {}] in {:.1}s",
                row.spreading_factor,
                row.payload_bytes,
                row.covariance_q,
                row.snr_db,
                css_fer::sweep::format_sig6(row.fer),
                row.frame_errors,
                row.trials,
                css_fer::sweep::format_sig6(row.ci_low),
                css_fer::sweep::format_sig6(row.ci_high),
                took.as_secs_f64(),
            );
        }
        if let Some(target) = args.target_fer {
            if row.ci_high > 3.0 * target {
                eprintln!(
                    "warning: S={} B={} q={} snr={} dB: 95% upper bound {} exceeds 3x target FER {target}",
                    row.spreading_factor, row.payload_bytes, row.covariance_q, row.snr_db, row.ci_high
                );
            }
        }
    };
    let meta = run_sweep(&config, &args.out, &options, &mut on_row)?;
    eprintln!(
        "wrote {} rows to {} ({} resumed) and {} in {:.1}s on {} workers",
        meta.points,
        args.out.display(),
        meta.resumed_points,
        metadata_path(&args.out).display(),
        meta.wall_time_s,
        meta.workers
    );
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
