mod config;
mod experiments;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use attractor_lab::LabError;
use clap::{Parser, Subcommand};

use crate::plot::Style;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid plot input: {0}")]
    Plot(String),
    #[error(transparent)]
    Lab(#[from] LabError),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Plot(_) => 2,
            CliError::Io(_) => 4,
            CliError::Lab(e) => match e {
                LabError::Contract(_) | LabError::Domain { .. } | LabError::Unsupported(_) => 2,
                LabError::Resource { .. } | LabError::NonTrapping(_) | LabError::Saturation { .. } => 3,
                _ => 4,
            },
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Plot(_) => "plot-input",
            CliError::Io(_) => "io",
            CliError::Lab(e) => match e {
                LabError::Domain { .. } => "domain",
                LabError::Numeric { .. } => "numeric",
                LabError::DerivativeOverflow { .. } => "derivative-overflow",
                LabError::Contract(_) => "contract",
                LabError::Resource { .. } => "resource",
                LabError::NoSuchBranch { .. } => "no-such-branch",
                LabError::InsufficientData(_) => "insufficient-data",
                LabError::OutOfChart { .. } => "out-of-chart",
                LabError::NonTrapping(_) => "non-trapping",
                LabError::Saturation { .. } => "saturation",
                LabError::Unsupported(_) => "unsupported",
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "attractor-lab", version, about = "Batch experiments on Lorenz-like and solenoid attractors")]
#[command(args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Also render the main series as SVG.
    #[arg(long, value_enum)]
    plot: Option<Style>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a CSV series or box cover as SVG.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "line")]
        style: Style,
        /// Logarithmic vertical axis.
        #[arg(long)]
        log: bool,
        /// Column for the horizontal axis (default: first).
        #[arg(long)]
        x: Option<String>,
        /// Column for the vertical axis (default: second).
        #[arg(long)]
        y: Option<String>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(Command::Plot { input, out, style, log, x, y }) = cli.command {
        let svg = plot::render_file(&input, style, log, x.as_deref(), y.as_deref())?;
        std::fs::write(out, svg)?;
        return Ok(());
    }
    let config = cli.config.ok_or_else(|| CliError::Config("--config is required".into()))?;
    let out = cli.out.ok_or_else(|| CliError::Config("--out is required".into()))?;
    let workers = match cli.workers {
        Some(0) => return Err(CliError::Config("--workers must be positive".into())),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
    let (cfg, bytes) = config::load(&config, cli.seed)?;
    std::fs::create_dir_all(&out).map_err(|e| CliError::Config(format!("output directory {}: {e}", out.display())))?;
    experiments::run(&cfg, &bytes, &out, cli.plot)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            report(&CliError::Config(e.to_string().trim().to_string()));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::from(e.exit_code())
        }
    }
}

fn report(e: &CliError) {
    let body = serde_json::json!({
        "error": {
            "code": e.exit_code(),
            "kind": e.kind(),
            "message": e.to_string(),
        }
    });
    eprintln!("{body}");
}
