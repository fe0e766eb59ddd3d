//! `qsl`: simulate, analyze, fit and sweep scalar-relaxation qubit dynamics.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qsl_core::Error;

#[derive(Parser, Debug)]
#[command(name = "qsl", version, about = "Geometric quantum speed limits under scalar relaxation")]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

/// Model and grid overrides shared by several subcommands.
#[derive(Args, Debug, Default, Clone)]
pub struct ModelArgs {
    /// Named parameter set, e.g. 20mM-sim or 300mM-meas.
    #[arg(long)]
    pub preset: Option<String>,
    /// Hydrogen T1 in seconds.
    #[arg(long, allow_hyphen_values = true)]
    pub t1h: Option<f64>,
    /// Carbon T2 in seconds.
    #[arg(long, allow_hyphen_values = true)]
    pub t2c: Option<f64>,
    /// Scalar coupling in hertz.
    #[arg(long, allow_hyphen_values = true)]
    pub j: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub z0: Option<f64>,
    /// Final time of the grid in seconds.
    #[arg(long, allow_hyphen_values = true)]
    pub t_max: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    /// Output directory (falls back to $QSL_OUT_DIR).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Measured <sigma_x> series (t_s,value) instead of the model.
    #[arg(long, conflicts_with = "preset")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub smooth_window: Option<usize>,
    #[arg(long)]
    pub smooth_degree: Option<usize>,
    /// Use the input series as is.
    #[arg(long)]
    pub no_smooth: bool,
    #[arg(long)]
    pub noise_floor: Option<f64>,
    /// Minimum normalized coherence gain counted as a revival.
    #[arg(long, default_value_t = qsl_core::markovianity::DEFAULT_REVIVAL_THRESHOLD)]
    pub revival_threshold: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    /// M0 exp(-t/T2C) cos(omega t)
    Expcos,
    /// amplitude * xi(t; T1H, T2C, J)
    Xi,
}

#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = FitModel::Xi)]
    pub model: FitModel,
    /// Freeze J at this value (hertz).
    #[arg(long)]
    pub fix_j: Option<f64>,
    /// Starting amplitude (xi) or M0 (expcos); defaults to the first sample.
    #[arg(long, allow_hyphen_values = true)]
    pub amplitude: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t1h: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t2c: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub j: Option<f64>,
    /// Starting frequency offset for expcos (rad/s).
    #[arg(long, allow_hyphen_values = true)]
    pub omega: Option<f64>,
    /// Enable the cos(omega_off t) nuisance factor in the xi model, starting here (rad/s).
    #[arg(long, allow_hyphen_values = true)]
    pub omega_off: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    /// Comma-separated preset names.
    #[arg(long, value_delimiter = ',', required = true)]
    pub presets: Vec<String>,
    /// Worker threads (default: number of processors).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub noise_floor: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form and trotterized <sigma_x>, plus normalized coherence.
    Simulate(ModelArgs),
    /// Relative-deviation curves, crossovers and Markovianity verdict.
    Analyze(AnalyzeArgs),
    /// Fit a relaxation model to a measured series.
    Fit(FitArgs),
    /// Analyze several presets concurrently.
    Sweep(SweepArgs),
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parameter(_) | Error::Domain(_) | Error::UnsupportedState(_) => 2,
        Error::Convergence { .. } | Error::FitNotConverged { .. } => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let base = match &cli.config {
        Some(path) => match config::RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(exit_code(&e));
            }
        },
        None => config::RunConfig::default(),
    };
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(base, &args),
        Command::Analyze(args) => commands::analyze(base, &args),
        Command::Fit(args) => commands::fit(base, &args),
        Command::Sweep(args) => commands::sweep(base, &args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
