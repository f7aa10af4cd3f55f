//! `peltier`: simulate, calibrate, sweep and play patterns on a dual-sided Peltier array.

mod commands;
mod config;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::CliConfig;
use crate::exit::Failure;

#[derive(Debug, Parser)]
#[command(name = "peltier", version, about = "Dual-sided Peltier thermal display toolkit")]
pub struct Cli {
    /// TOML file with defaults for params, controller, out_dir, dt, duration and seed.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Directory for default output file names.
    #[arg(long, global = true, env = "PELTIER_OUT_DIR", value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    /// Human-readable tables instead of JSON on standard output.
    #[arg(long, global = true)]
    pub pretty: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Constant-voltage bench run from ambient: trace CSV plus lifetime summary.
    Simulate(SimulateArgs),
    /// Fit model parameters to measured lifetimes.
    Calibrate(CalibrateArgs),
    /// Lifetime table over a voltage range, with the selected optimal voltage.
    Sweep(SweepArgs),
    /// Compile a pattern and report its schedule and annotations without running it.
    Compile(CompileArgs),
    /// Compile a pattern and play it on a backend, writing temperature and action traces.
    RunPattern(RunPatternArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Parameter JSON; defaults to the bundled calibrated set.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    pub voltage: f64,
    /// Seconds [default: 600].
    #[arg(long)]
    pub duration: Option<f64>,
    /// Integration step in seconds [default: 0.01].
    #[arg(long)]
    pub dt: Option<f64>,
    /// Trace CSV [default: <out-dir>/trace.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Observation JSON array; defaults to the bundled bench dataset.
    #[arg(long)]
    pub observations: Option<PathBuf>,
    /// Starting parameter JSON; defaults to the built-in initial guess.
    #[arg(long)]
    pub initial: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    pub restarts: usize,
    /// Seed for the restart perturbations [default: 7].
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1500)]
    pub max_iters: usize,
    /// Fitted parameter JSON [default: <out-dir>/calibrated_params.json].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fit report JSON [default: <out-dir>/fit_report.json].
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Exit 0 even if the simplex did not converge.
    #[arg(long)]
    pub allow_nonconverged: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub from: f64,
    #[arg(long, default_value_t = 5.0)]
    pub to: f64,
    #[arg(long, default_value_t = 0.5)]
    pub step: f64,
    /// Table CSV [default: <out-dir>/sweep.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    /// In-process thermal model.
    Sim,
    /// Thermal model behind the framed wire protocol, through an in-memory device emulator.
    Emulator,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    #[arg(long, value_name = "FILE")]
    pub pattern: PathBuf,
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Controller settings (.toml or .json).
    #[arg(long)]
    pub controller: Option<PathBuf>,
    /// Schedule JSON; printed to standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit 6 if the schedule carries any annotation.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct RunPatternArgs {
    #[arg(long, value_name = "FILE")]
    pub pattern: PathBuf,
    #[arg(long, value_enum, default_value_t = BackendKind::Sim)]
    pub backend: BackendKind,
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Controller settings (.toml or .json).
    #[arg(long)]
    pub controller: Option<PathBuf>,
    /// Directory for actions.csv, temps.csv and schedule.json [default: <out-dir>].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Refuse to run (exit 6) if compilation produced annotations.
    #[arg(long)]
    pub strict: bool,
    /// Sensor noise standard deviation, kelvin.
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    /// Noise seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Put the skin-facing faces in contact with skin.
    #[arg(long)]
    pub skin_contact: bool,
    /// Plant integration step in seconds [default: 0.01].
    #[arg(long)]
    pub dt: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(p) => CliConfig::load(p)?,
        None => CliConfig::default(),
    };
    let ctx = commands::Context {
        out_dir: cli
            .out_dir
            .clone()
            .or_else(|| file.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from(".")),
        file,
        pretty: cli.pretty,
    };
    match &cli.command {
        Command::Simulate(a) => commands::simulate(&ctx, a),
        Command::Calibrate(a) => commands::calibrate(&ctx, a),
        Command::Sweep(a) => commands::sweep(&ctx, a),
        Command::Compile(a) => commands::compile(&ctx, a),
        Command::RunPattern(a) => commands::run_pattern(&ctx, a),
    }
}
