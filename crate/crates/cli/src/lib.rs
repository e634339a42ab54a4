//! Command-line surface of `mkp`: identity verification, stability analysis,
//! potential checks, solvers and fitters over the flat six-dimensional model.
//!
//! Exit codes: 0 success, 1 verification failure, 2 I/O or configuration
//! error, 3 form not stable of negative type, 4 solver failure.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "mkp", version, about = "Mirror Kähler potential toolkit")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub json: Option<PathBuf>,
    /// Seed for every sampling step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the parallel kernels.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the exact identity battery.
    Verify(VerifyArgs),
    /// Hitchin analysis of a constant 3-form.
    Stability(StabilityArgs),
    /// dd^s(φσ₀) and −dd^s(φρ₀) for a potential.
    MkpCheck(PhiArgs),
    /// Plurisubharmonicity and SL-plurisubharmonicity of a polynomial potential.
    Psh(PshArgs),
    /// Density of one of the potential equations.
    Residual(ResidualArgs),
    /// Newton solver for the semi-flat σ₂ equation.
    SolveSemiflat(SemiflatArgs),
    /// Partial Legendre transform experiment.
    Legendre(LegendreArgs),
    /// Least-squares continuity fit.
    Fit(FitArgs),
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Run only these suites (repeatable).
    #[arg(long)]
    pub only: Vec<String>,
    #[arg(long)]
    pub forms_per_degree: Option<usize>,
    #[arg(long)]
    pub eq13_samples: Option<usize>,
}

#[derive(Args, Debug)]
pub struct StabilityArgs {
    /// Form file of degree 3 with constant coefficients.
    pub form: PathBuf,
}

#[derive(Args, Debug)]
pub struct PhiArgs {
    /// Degree-0 form file.
    #[arg(long)]
    pub phi: PathBuf,
}

#[derive(Args, Debug)]
pub struct PshArgs {
    #[arg(long)]
    pub phi: PathBuf,
    /// Evaluation point `x1,…,x6` (repeatable); the origin when absent.
    #[arg(long, value_delimiter = ',', num_args = 6)]
    pub point: Vec<f64>,
    /// Cone samples.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ResidualArgs {
    /// 9, 11, 13 or 14.
    #[arg(long)]
    pub equation: u8,
    #[arg(long)]
    pub phi: Option<PathBuf>,
    /// Degree-3 potential α (equation 9).
    #[arg(long)]
    pub alpha: Option<PathBuf>,
    /// Degree-3 potential β (equation 9).
    #[arg(long)]
    pub beta: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SemiflatArgs {
    #[arg(long = "N")]
    pub n: Option<usize>,
    /// Manufactured solution `½|x|² + ε sin x¹ sin x³`, given as `eps=ε`.
    #[arg(long)]
    pub manufactured: Option<String>,
    /// Right-hand side grid file on axes 1;3;5.
    #[arg(long)]
    pub rhs: Option<PathBuf>,
    /// Diagonal of the quadratic part, `a,b,c`.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub q: Vec<f64>,
    /// Finite-difference order, 2 or 4.
    #[arg(long)]
    pub stencil: Option<u8>,
    /// Convergence table (manufactured runs).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Solved periodic part as a grid file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-node residual table `x1,x3,x5,residual`.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LegendreArgs {
    /// `quadratic:a,b,c`, `manufactured:ε` or `random:seed`.
    #[arg(long)]
    pub function: Option<String>,
    /// Potential file used instead of `--function`.
    #[arg(long)]
    pub phi: Option<PathBuf>,
    /// Odd coordinates to transform, e.g. `1,3`.
    #[arg(long, value_delimiter = ',')]
    pub subset: Vec<usize>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub half_width: Option<f64>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long)]
    pub t: Option<f64>,
    /// Target description; the flat pair when absent.
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub cutoff: Option<usize>,
    /// Fitted periodic correction as a grid file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(mkp_core::CoreError),
}

impl From<mkp_core::CoreError> for CliError {
    fn from(e: mkp_core::CoreError) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(s) => f.write_str(s),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

pub const EXIT_VERIFY_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NOT_STABLE: u8 = 3;
pub const EXIT_SOLVER_FAILED: u8 = 4;

pub fn run(cli: &Cli) -> Result<u8, CliError> {
    let file = RunConfig::load(cli.config.as_deref())?;
    if let Some(n) = cli.threads.or(file.threads) {
        config::check_range("threads", n, 1, 1024)?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let ctx = commands::Context {
        file,
        seed: cli.seed,
        json: cli.json.clone(),
    };
    match &cli.command {
        Command::Verify(a) => commands::verify(&ctx, a),
        Command::Stability(a) => commands::stability(&ctx, a),
        Command::MkpCheck(a) => commands::mkp_check(&ctx, a),
        Command::Psh(a) => commands::psh(&ctx, a),
        Command::Residual(a) => commands::residual(&ctx, a),
        Command::SolveSemiflat(a) => commands::solve_semiflat(&ctx, a),
        Command::Legendre(a) => commands::legendre(&ctx, a),
        Command::Fit(a) => commands::fit(&ctx, a),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}
