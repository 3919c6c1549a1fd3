//! Experiment runner: reproduces the figure-class experiments at desk scale
//! and exposes the library's solvers as commands.
//!
//! Every run resolves its configuration from per-experiment defaults, an
//! optional flat `key = value` config file, and flag overrides, in that
//! order; the result drives the run and is echoed to `manifest.txt` in the
//! output directory. Identical configurations (including the seed) produce
//! byte-identical CSV output.

mod config;
mod runners;
mod selfcheck;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{Builder, Kind};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Check(String),
    Lib(ribs::Error),
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Check(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<ribs::Error> for CliError {
    fn from(e: ribs::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    /// Stable tag for the machine-readable error record.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "Config",
            CliError::Check(_) => "SelfCheckFailed",
            CliError::Io(_) => "Io",
            CliError::Lib(e) => match e {
                ribs::Error::SingularOperator => "SingularOperator",
                ribs::Error::EmptySpectrum => "EmptySpectrum",
                ribs::Error::GridMismatch { .. } => "GridMismatch",
                ribs::Error::IncompatibleGrids { .. } => "IncompatibleGrids",
                ribs::Error::CompositionOverflow { .. } => "CompositionOverflow",
                ribs::Error::ZeroLinearCoefficient => "ZeroLinearCoefficient",
                ribs::Error::ConditionViolated(_) => "ConditionViolated",
                ribs::Error::EqualFrequencies(_) => "EqualFrequencies",
                ribs::Error::NonPositiveSigma(_) => "NonPositiveSigma",
                ribs::Error::Shape(_) => "Shape",
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "ribs-cli",
    about = "Inverse-series experiment runner",
    after_help = "Worker count follows RAYON_NUM_THREADS; outputs are \
                  byte-identical for any thread count. Each run writes \
                  manifest.txt, which can be fed back through --config to \
                  repeat the run."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Three-method convergence comparison on the dense quadratic toy model.
    Toy(RunArgs),
    /// Reconstruct a potential from internal well measurements.
    SchrodingerRecon(RunArgs),
    /// Tabulate the convergence radius over retrieval margin widths.
    BoundsRadius(RunArgs),
    /// Two-frequency recovery of conductivity and storage.
    HydroRecon(RunArgs),
    /// Run fast cross-module invariant checks; no artifacts.
    Selfcheck(SelfcheckArgs),
}

/// Overrides applied on top of the config file; flags not meaningful for
/// the chosen experiment are rejected.
#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing [default: runs/<experiment>]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fine (synthesis) grid cells; the bounds grid.
    #[arg(long)]
    fine: Option<usize>,
    /// Coarse (reconstruction) grid cells.
    #[arg(long)]
    coarse: Option<usize>,
    /// Retrieval margin: the reconstruction lives at distance >= eps from
    /// the boundary.
    #[arg(long)]
    eps: Option<f64>,
    /// ibs-K (summed series), gn, ch, or ribs-K (restarted).
    #[arg(long)]
    method: Option<String>,
    /// Outer iterations for the restarted methods.
    #[arg(long)]
    iterations: Option<usize>,
    /// Relative SVD truncation threshold [default: matched to noise]
    #[arg(long)]
    tau: Option<f64>,
    /// Noise level relative to the peak data entry.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// First angular frequency (hydro).
    #[arg(long)]
    omega1: Option<f64>,
    /// Second angular frequency (hydro).
    #[arg(long)]
    omega2: Option<f64>,
    /// Node stride of the Green-column sample (bounds).
    #[arg(long)]
    stride: Option<usize>,
    /// Norm of the regularized linear inverse in the radius formula (bounds).
    #[arg(long = "b1-norm")]
    b1_norm: Option<f64>,
    /// Comma-separated margin widths for the radius table (bounds).
    #[arg(long = "eps-list")]
    eps_list: Option<String>,
    /// Published problem size (fine 400 / coarse 80) instead of desk scale;
    /// explicit --fine/--coarse still win.
    #[arg(long = "full-scale")]
    full_scale: bool,
    /// Well layout name; only "standard" exists.
    #[arg(long)]
    wells: Option<String>,
}

#[derive(Args)]
struct SelfcheckArgs {
    /// Seed for the randomized checks.
    #[arg(long, default_value_t = 11)]
    seed: u64,
}

fn build_config(kind: Kind, args: &RunArgs) -> Result<config::ExperimentConfig, CliError> {
    let mut b = Builder::new(kind);
    if let Some(path) = &args.config {
        b.apply_file(path)?;
    }
    if args.full_scale {
        b.set_full_scale();
    }
    let scalar = |v: &Option<f64>| v.map(|x| x.to_string());
    let pairs: [(&str, Option<String>); 13] = [
        ("fine", args.fine.map(|v| v.to_string())),
        ("coarse", args.coarse.map(|v| v.to_string())),
        ("eps", scalar(&args.eps)),
        ("method", args.method.clone()),
        ("iterations", args.iterations.map(|v| v.to_string())),
        ("tau", scalar(&args.tau)),
        ("noise", scalar(&args.noise)),
        ("seed", args.seed.map(|v| v.to_string())),
        ("omega1", scalar(&args.omega1)),
        ("omega2", scalar(&args.omega2)),
        ("stride", args.stride.map(|v| v.to_string())),
        ("b1_norm", scalar(&args.b1_norm)),
        ("eps_list", args.eps_list.clone()),
    ];
    for (key, value) in pairs {
        if let Some(v) = value {
            b.set(key, &v)?;
        }
    }
    if let Some(out) = &args.out {
        b.set("out", &out.display().to_string())?;
    }
    b.finish()
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Toy(a) => runners::run(&build_config(Kind::Toy, &a)?),
        Command::SchrodingerRecon(a) => runners::run(&build_config(Kind::Schrodinger, &a)?),
        Command::BoundsRadius(a) => runners::run(&build_config(Kind::Bounds, &a)?),
        Command::HydroRecon(a) => runners::run(&build_config(Kind::Hydro, &a)?),
        Command::Selfcheck(a) => selfcheck::run(a.seed),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        let record = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
        eprintln!("{record}");
        std::process::exit(e.exit_code());
    }
}
