use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acspi::config::{ConvergenceAxis, RunConfig};
use acspi::experiments::{self, ExperimentError, Series};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Coherent-state path-integral wave-packet propagation.
#[derive(Debug, Parser)]
#[command(name = "acspi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; overrides `output.path`. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sample every this many steps; overrides `output.stride`.
    #[arg(long)]
    stride: Option<usize>,
    /// Only log errors.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Axis {
    NSteps,
    K,
    Grid,
}

impl From<Axis> for ConvergenceAxis {
    fn from(a: Axis) -> Self {
        match a {
            Axis::NSteps => ConvergenceAxis::NSteps,
            Axis::K => ConvergenceAxis::K,
            Axis::Grid => ConvergenceAxis::Grid,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Propagate with the phase-space path integral.
    Propagate(Common),
    /// Propagate with the truncated Fock-basis reference.
    Oracle(Common),
    /// Run both methods; prints a summary line on stderr.
    Compare(Common),
    /// Deviation from the reference versus one numerical parameter.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Overrides `convergence.axis`.
        #[arg(long, value_enum)]
        axis: Option<Axis>,
    },
    /// Self-checks of the symbol calculus and the grid.
    Diagnostics(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Self::Propagate(c) | Self::Oracle(c) | Self::Compare(c) | Self::Diagnostics(c) => c,
            Self::Convergence { common, .. } => common,
        }
    }
}

fn load(common: &Common) -> Result<RunConfig, ExperimentError> {
    let mut cfg = RunConfig::from_path(&common.config)?;
    if let Some(stride) = common.stride {
        cfg.output.get_or_insert(acspi::config::OutputSection { path: None, stride }).stride = stride;
    }
    Ok(cfg)
}

fn open_out(common: &Common, cfg: &RunConfig) -> io::Result<Box<dyn Write>> {
    let path: Option<&Path> = common.out.as_deref().or(cfg.output.as_ref().and_then(|o| o.path.as_deref()));
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(common: &Common, cfg: &RunConfig, series: &[&Series]) -> Result<(), ExperimentError> {
    let mut out = open_out(common, cfg)?;
    experiments::write_csv(&mut out, series)?;
    out.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode, ExperimentError> {
    let common = cli.command.common();
    let cfg = load(common)?;
    match &cli.command {
        Command::Propagate(_) => emit(common, &cfg, &[&experiments::run_propagate(&cfg)?])?,
        Command::Oracle(_) => emit(common, &cfg, &[&experiments::run_oracle(&cfg)?])?,
        Command::Compare(_) => {
            let report = experiments::run_compare(&cfg)?;
            emit(common, &cfg, &[&report.acspi, &report.fock, &report.diff])?;
            eprintln!("{}", report.summary);
        }
        Command::Convergence { axis, .. } => {
            let rows = experiments::run_convergence(&cfg, axis.map(Into::into))?;
            let mut out = open_out(common, &cfg)?;
            experiments::write_convergence_csv(&mut out, &rows)?;
            out.flush()?;
        }
        Command::Diagnostics(_) => {
            let report = experiments::run_diagnostics(&cfg)?;
            print!("{report}");
            if !report.all_passed() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.command.common().quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
