//! `dimer-dpt`: runs one analysis of the dissipative dimer and writes its data
//! product plus a JSON manifest.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use dimer_core::DimerError;
use serde_json::json;

use commands::{execute, Context, Product};
use config::{Command, ConfigError, RunConfig};

const MANIFEST_SCHEMA_VERSION: u32 = 1;

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "dimer-dpt", version, about = "Dissipative dimer transport and dynamical phase transitions")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// JSON run configuration (defaults apply to missing keys).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "DIMER_DPT_WORKERS")]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Sub {
    /// Velocity field on a stereographic or yz grid.
    Flowfield,
    /// One deterministic, stochastic or decoupled trajectory.
    Trajectory,
    /// Noise-averaged statistics of many stochastic trajectories.
    Ensemble,
    /// Final fidelity of a field ramp versus dephasing rate.
    Sweep,
    /// Fixed points of a sphere flow with their classification.
    FixedPoints,
    /// Eigenvalues of the averaged linear flow.
    Spectrum,
    /// Dynamical free energy over a grid of bias strengths.
    FreeEnergy,
    /// Bias calibration of the pseudospin oracle.
    Calibrate,
    /// Check a configuration without running it.
    Validate,
    /// Run the command named in the configuration.
    Run,
}

impl Sub {
    fn command(self) -> Option<Command> {
        Some(match self {
            Sub::Flowfield => Command::Flowfield,
            Sub::Trajectory => Command::Trajectory,
            Sub::Ensemble => Command::Ensemble,
            Sub::Sweep => Command::Sweep,
            Sub::FixedPoints => Command::FixedPoints,
            Sub::Spectrum => Command::Spectrum,
            Sub::FreeEnergy => Command::FreeEnergy,
            Sub::Calibrate => Command::Calibrate,
            Sub::Validate | Sub::Run => return None,
        })
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Model(#[from] DimerError),
    #[error("{0}")]
    Incomplete(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(ConfigError::Io { .. }) | CliError::Io { .. } => EXIT_RUNTIME,
            CliError::Config(_) | CliError::Usage(_) => EXIT_CONFIG,
            CliError::Model(DimerError::NonConvergence { .. } | DimerError::CalibrationFailure { .. }) => {
                EXIT_NUMERICAL
            }
            CliError::Model(_) => EXIT_CONFIG,
            CliError::Incomplete(_) => EXIT_NUMERICAL,
        }
    }
}

fn load(path: Option<&Path>) -> Result<RunConfig, ConfigError> {
    match path {
        Some(p) => RunConfig::load(p),
        None => RunConfig::parse("{}"),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = load(cli.config.as_deref())?;
    let command = match cli.command {
        Sub::Validate => {
            println!("OK");
            return Ok(());
        }
        Sub::Run => config
            .command
            .ok_or_else(|| CliError::Usage("configuration has no `command` to run".into()))?,
        sub => sub.command().expect("data subcommand"),
    };
    let workers = match cli.workers {
        Some(0) => return Err(CliError::Usage("--workers must be >= 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let out_dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output.dir));
    std::fs::create_dir_all(&out_dir).map_err(|source| CliError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let ctx = Context {
        seed: cli.seed.unwrap_or(config.seed),
        workers,
        config,
    };

    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {workers} workers: {e}")))?;
    let product: Product = pool.install(|| execute(command, &ctx))?;
    let wall = clock.elapsed().as_secs_f64();

    write_file(&out_dir.join(&product.file_name), &product.contents)?;
    let manifest = json!({
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "command": command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "master_seed": ctx.seed,
        "workers": workers,
        "started_unix": started,
        "wall_time_s": wall,
        "outputs": [product.file_name],
        "config": ctx.config,
        "summary": product.summary,
        "incomplete": product.incomplete,
    });
    let manifest_name = format!("{}.manifest.json", command.name());
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&out_dir.join(manifest_name), &(text + "\n"))?;
    eprintln!("wrote {}", out_dir.join(&product.file_name).display());
    match product.incomplete {
        Some(reason) => Err(CliError::Incomplete(reason)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
