//! Experiment harness: TOML manifests in, CSV and JSON out.

pub mod capacity;
pub mod codec;
pub mod config;
pub mod error;
pub mod estimate;
pub mod output;
pub mod session;
pub mod synth;

use clap::{Args, Parser, Subcommand};
use config::{Manifest, Sweep};
use error::{CliError, Result};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "qsdc", version, about = "CV-QSDC simulator with mask coding and OAM multiplexing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a protocol session (or a sweep of sessions).
    Session(CommonArgs),
    /// Secrecy-capacity sweep for N modes and a single mode.
    Capacity(CommonArgs),
    /// Channel parameter estimation from CSV samples.
    Estimate(CommonArgs),
    /// Mask-codec worked example and round-trip property checks.
    Codec(CommonArgs),
    /// Write synthetic estimation inputs.
    Synth(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides QSDC_SEED and the file seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// KEY=START:STOP:STEP
    #[arg(long)]
    pub sweep: Option<String>,
}

fn load(args: &CommonArgs) -> Result<Manifest> {
    let path = args.config.as_ref().ok_or_else(|| CliError::Config("--config FILE is required".into()))?;
    let mut m = Manifest::load(path)?;
    m.resolve_seed(args.seed)?;
    Ok(m)
}

fn no_sweep(args: &CommonArgs, command: &str) -> Result<()> {
    match args.sweep {
        Some(_) => Err(CliError::Config(format!("{command} does not take --sweep"))),
        None => Ok(()),
    }
}

fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Session(a) => {
            let sweep = a.sweep.as_deref().map(Sweep::parse).transpose()?;
            session::cmd_session(&load(a)?, &a.out, sweep.as_ref())
        }
        Command::Capacity(a) => {
            let sweep = a.sweep.as_deref().map(Sweep::parse).transpose()?;
            capacity::cmd_capacity(&load(a)?, &a.out, sweep.as_ref())
        }
        Command::Estimate(a) => {
            no_sweep(a, "estimate")?;
            estimate::cmd_estimate(&load(a)?, &a.out)
        }
        Command::Codec(a) => {
            no_sweep(a, "codec")?;
            match &a.config {
                Some(_) => {
                    let m = load(a)?;
                    codec::cmd_codec(Some(&m), m.file.seed, &a.out)
                }
                None => {
                    let mut m = Manifest::parse("config_version = 1\nseed = 42\n", std::path::Path::new("."))?;
                    m.resolve_seed(a.seed)?;
                    codec::cmd_codec(None, m.file.seed, &a.out)
                }
            }
        }
        Command::Synth(a) => {
            no_sweep(a, "synth")?;
            synth::cmd_synth(&load(a)?, &a.out)
        }
    }
}

fn jobs(command: &Command) -> Option<usize> {
    match command {
        Command::Session(a) | Command::Capacity(a) | Command::Estimate(a) | Command::Codec(a) | Command::Synth(a) => {
            a.jobs
        }
    }
}

/// Runs a parsed command inside a thread pool sized by `--jobs`.
pub fn run(cli: &Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs(&cli.command) {
        if j == 0 {
            return Err(CliError::Config("--jobs must be >= 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| CliError::Internal(e.to_string()))?;
    pool.install(|| dispatch(&cli.command))
}
