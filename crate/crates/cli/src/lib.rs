//! Command-line front end: argument parsing, dispatch and exit codes.

pub mod commands;
pub mod output;
pub mod plot;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Flag combinations rejected after parsing; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const EXIT_DOMAIN: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "midpred", version, about = "Sub-predictor chain design for input-delayed nonlinear systems")]
pub struct Cli {
    /// Output directory for CSV files, plot scripts and the run manifest.
    #[arg(long, global = true, env = "MIDPRED_OUT", default_value = "out")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gain placing a root of multiplicity n+1 at the rightmost admissible point.
    Synth(SynthArgs),
    /// Stability partition of the delay axis for the synthesized gain.
    Margins(MarginsArgs),
    /// Certified bracket on the admissible gain perturbation.
    Gainmargin(GainMarginArgs),
    /// Number of sub-predictors and scalar gain for a given delay.
    Design(DesignArgs),
    /// Roots of the characteristic quasipolynomial in a rectangle.
    Spectrum(SpectrumArgs),
    /// Integrates the plant and the predictor chain.
    Simulate(SimulateArgs),
    /// Evaluates competing sufficient conditions side by side.
    Compare(CompareArgs),
    /// Regenerates the data and plot scripts of a figure.
    Repro(ReproArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    /// Delay used to scale the gain.
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    /// Also write the results as a TOML key-value file.
    #[arg(long)]
    pub kv: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct MarginsArgs {
    #[arg(long)]
    pub n: usize,
    /// Upper end of the delay axis; defaults to three periods of the slowest crossing.
    #[arg(long)]
    pub delta_max: Option<f64>,
    /// Smallest order included in the CSV (defaults to `n`).
    #[arg(long)]
    pub n_min: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct GainMarginArgs {
    #[arg(long)]
    pub n: usize,
    /// Bisection stops when the bracket is narrower than `tol * l_n`.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct DesignArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub gamma_phi: f64,
    #[arg(long)]
    pub h: f64,
    /// Gain margin; certified from the LMI bisection when omitted.
    #[arg(long)]
    pub gamma_m: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    /// `re_min,re_max,im_min,im_max`
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub rect: Option<Vec<f64>>,
    /// Grid cells per unit length in the initial scan.
    #[arg(long, default_value_t = 32.0)]
    pub density: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum VariantArg {
    #[value(name = "ahmed")]
    #[serde(rename = "ahmed")]
    Ahmed,
    #[value(name = "ours_N1", alias = "ours_n1")]
    #[serde(rename = "ours_N1")]
    OursN1,
    #[value(name = "ours_N5", alias = "ours_n5")]
    #[serde(rename = "ours_N5")]
    OursN5,
}

impl From<VariantArg> for midpred::sim::Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Ahmed => midpred::sim::Variant::Ahmed,
            VariantArg::OursN1 => midpred::sim::Variant::OursN1,
            VariantArg::OursN5 => midpred::sim::Variant::OursN5,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// System definition file; the built-in two-state example when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "ours_N5")]
    pub variant: VariantArg,
    /// Input delay; overrides the value in the config file.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, default_value_t = midpred::sim::EXAMPLE_T_END)]
    pub t_end: f64,
    /// Requested step, snapped to divide the sub-delay.
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    /// Order; inferred from `--L` when given.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub h: f64,
    #[arg(long)]
    pub lambda: f64,
    /// Observer gain `l_1,..,l_n` for the competing conditions; defaults to the synthesized gain.
    #[arg(long = "L", value_delimiter = ',', allow_hyphen_values = true)]
    pub l: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.0)]
    pub gamma_phi: f64,
    #[arg(long)]
    pub gamma_m: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    #[value(name = "d_vs_n")]
    DVsN,
    Spectrum,
    #[value(name = "error_norm")]
    ErrorNorm,
    All,
}

#[derive(Debug, Args, Serialize)]
pub struct ReproArgs {
    #[arg(long, value_enum)]
    pub figure: Figure,
    /// Largest order in the partition sweep.
    #[arg(long, default_value_t = 30)]
    pub n_max: usize,
    #[arg(long)]
    pub delta_max: Option<f64>,
    /// Delays for the error-norm figures.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5")]
    pub h: Vec<f64>,
    /// Delay of the spectrum figure.
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
}

/// Parses `argv` (including the program name), runs the subcommand and maps
/// failures to exit codes.
pub fn run<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_DOMAIN)
        }
    }
}
