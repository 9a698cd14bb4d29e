//! `jpaql`: quantum-limit curves, amplification-chain simulations,
//! calibration fits and the efficiency-versus-gain pipeline.
//!
//! Exit codes: 0 on success, 2 for configuration or validation errors,
//! 3 for numerical failures and 1 for I/O errors.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jpa_core::chain::SweepKind;
use jpa_core::fit::Weighting;

use crate::config::{Format, Gain, Hz, RunConfig, Spacing};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] jpa_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        use jpa_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Core(e) => match e.root() {
                E::Quadrature { .. } | E::Singular { .. } | E::NotConverged => 3,
                _ => 2,
            },
            CliError::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "jpaql",
    version,
    about = "Quantum limits and calibration of nondegenerate Josephson parametric amplifiers"
)]
struct Cli {
    /// Run configuration (JSON). Every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `sweep.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Tabular output format, overrides `output.format`.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Quantum-limited added noise and efficiency versus signal bandwidth.
    Limit(LimitArgs),
    /// Synthetic Planck or coherent calibration sweep.
    Simulate(SimulateArgs),
    /// Fits a sweep and converts the result into a quantum efficiency.
    Fit(FitArgs),
    /// Sweeps, fits and efficiency curves over a grid of gains.
    Pipeline,
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    #[arg(long)]
    pub b_s_min: Option<Hz>,
    #[arg(long)]
    pub b_s_max: Option<Hz>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, value_enum)]
    pub spacing: Option<Spacing>,
    /// One curve per detuning, e.g. `30kHz,37.5kHz,300kHz`.
    #[arg(long, value_delimiter = ',')]
    pub delta: Vec<Hz>,
    /// One curve per reconstruction bandwidth.
    #[arg(long, value_delimiter = ',')]
    pub b_meas: Vec<Hz>,
    /// Adds the numerical-quadrature column.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub kind: SweepKind,
    /// Narrowband gain, e.g. `20dB` or `100`; defaults to `amplifier.signal_gain`.
    #[arg(long)]
    pub gain: Option<Gain>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeightingArg {
    Uniform,
    Relative,
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Uniform => Weighting::Uniform,
            WeightingArg::Relative => Weighting::Relative,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Sweep dataset (CSV, or JSON by extension).
    pub dataset: PathBuf,
    #[arg(long)]
    pub model: SweepKind,
    /// Defaults to `sweep.weighting`.
    #[arg(long, value_enum)]
    pub weighting: Option<WeightingArg>,
    /// Frequency of the Planck model; defaults to `amplifier.signal_frequency`.
    #[arg(long)]
    pub f_signal: Option<Hz>,
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.run = None;
    if let Some(seed) = cli.seed {
        cfg.sweep.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if let Some(format) = cli.format {
        cfg.output.format = format;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli)?;
    match cli.command {
        Command::Limit(args) => commands::limit(cfg, &args),
        Command::Simulate(args) => commands::simulate(cfg, &args),
        Command::Fit(args) => commands::fit(cfg, &args),
        Command::Pipeline => commands::pipeline(cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("jpaql: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
