//! Batch front end for NV-center strain spectroscopy: simulate zero-field
//! ODMR spectra from strain inputs, fit measured spectra, report strain
//! metrics, and export orientation geometry and readout-fidelity curves.
//!
//! Exit codes: 0 success, 2 configuration or parse error, 3 fit
//! non-convergence.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod io;

/// Command-line error with its process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    NonConvergence(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn non_convergence(msg: impl Into<String>) -> Self {
        CliError::NonConvergence(msg.into())
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::NonConvergence(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) | CliError::NonConvergence(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<nv_strain::Error> for CliError {
    fn from(e: nv_strain::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "nv-strain",
    version,
    about = "Zero-field ODMR spectra of NV centers under crystal strain: simulate, fit, and invert"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a spectrum from a strain scenario, tensor, or amplitudes.
    Simulate(SimulateArgs),
    /// Fit a dual-Lorentzian dip model to a measured spectrum CSV.
    Fit(FitArgs),
    /// Report shift, splitting, and imbalance from a fit result or model.
    Metrics(MetricsArgs),
    /// Export the four NV orientations and their dipole vectors.
    Orientations(OrientationsArgs),
    /// Tabulate the photon-readout fidelity over a photon-count grid.
    Fidelity(FidelityArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// JSON run configuration (flags below override its core fields).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Spectrum output path (default: spectrum.csv or spectrum.json).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sidecar path for the model and metrics (default: next to the spectrum).
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Zero-field splitting in GHz.
    #[arg(long)]
    d_ghz: Option<f64>,
    /// Microwave drive angle against the NV x axis, radians.
    #[arg(long)]
    phi_mw_rad: Option<f64>,
    /// Lorentzian half width at half maximum, GHz.
    #[arg(long)]
    gamma_ghz: Option<f64>,
    /// Dimensionless dip depth for a unit-weight dip.
    #[arg(long)]
    depth: Option<f64>,
    /// Off-resonance photoluminescence level.
    #[arg(long)]
    baseline: Option<f64>,
}

#[derive(Args)]
pub struct FitArgs {
    /// One spectrum CSV (`nu_ghz,pl[,sigma]`).
    #[arg(long, conflicts_with = "input_dir")]
    input: Option<PathBuf>,
    /// Directory of spectrum CSVs, fitted in parallel.
    #[arg(long)]
    input_dir: Option<PathBuf>,
    /// JSON fit configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Result path for --input (default: input with .fit.json).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Result directory for --input-dir (default: next to the inputs).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Also write a residuals CSV (single-input mode).
    #[arg(long)]
    residuals: Option<PathBuf>,
    /// Zero-field splitting for the strain inversion, GHz.
    #[arg(long)]
    d_ghz: Option<f64>,
    /// Drive angle, when known, to recover the strain phase.
    #[arg(long)]
    phi_mw_rad: Option<f64>,
}

#[derive(Args)]
pub struct MetricsArgs {
    /// Result JSON written by `fit`.
    #[arg(long, conflicts_with = "config")]
    fit_json: Option<PathBuf>,
    /// Model configuration (same schema as `simulate --config`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write the metrics as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
pub struct OrientationsArgs {
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct FidelityArgs {
    /// Fluorescence contrast in [0, 1].
    #[arg(long)]
    contrast: f64,
    /// Smallest photon count.
    #[arg(long, default_value_t = 1.0)]
    n_min: f64,
    /// Largest photon count.
    #[arg(long, default_value_t = 1000.0)]
    n_max: f64,
    /// Number of grid points.
    #[arg(long, default_value_t = 50)]
    points: usize,
    /// Logarithmic photon grid.
    #[arg(long)]
    log: bool,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => commands::cmd_simulate(args),
        Command::Fit(args) => commands::cmd_fit(args),
        Command::Metrics(args) => commands::cmd_metrics(args),
        Command::Orientations(args) => commands::cmd_orientations(args),
        Command::Fidelity(args) => commands::cmd_fidelity(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
