//! `charmax`: batch front-end for maximal-domain computations.
//!
//! Exit status is 0 on success, 1 for I/O, parse or usage errors and 2 when
//! a validation or convergence check fails.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "charmax",
    version,
    about = "Maximal domains of analytic extension for quasi-linear first-order PDEs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check first integrals, nondegeneracy and F on the initial set.
    Verify(Common),
    /// Compute the maximal domain and write its mask, boundary and summary.
    Domain(Common),
    /// Classify one point as inside (with u), outside or boundary.
    Query(QueryArgs),
    /// Integrate characteristics seeded on the initial set.
    Characteristics(CharArgs),
    /// Extract the singular locus and the discretized surface.
    Singular(Common),
    /// Envelope of characteristic lines for u_t + a(u) u_x = 0.
    Envelope(EnvelopeArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Problem description (JSON).
    #[arg(long)]
    pub problem: PathBuf,
    /// Cells per axis of the extraction grid.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Directory for output files.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args, Debug, Clone)]
pub struct QueryArgs {
    #[command(flatten)]
    pub common: Common,
    /// Time coordinate of the query point
    #[arg(long, allow_hyphen_values = true)]
    pub t: f64,
    /// Space coordinate of the query point (required when n = 1)
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<f64>,
    /// Also build the domain mask and retry failed straight paths through it.
    #[arg(long)]
    pub staircase: bool,
}

#[derive(Args, Debug, Clone)]
pub struct CharArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of curves, seeded uniformly on the initial set.
    #[arg(long, default_value_t = 3)]
    pub seeds: usize,
    /// Parameter length of each curve (both directions); defaults to ten box diagonals.
    #[arg(long)]
    pub span: Option<f64>,
    /// Integrator tolerance, within [1e-13, 1e-3]
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Args, Debug, Clone)]
pub struct EnvelopeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Envelope samples over the parameter range.
    #[arg(long, default_value_t = 101)]
    pub samples: usize,
}

pub enum Failure {
    Input(String),
    Check(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Check(_) => 2,
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("CHARMAX_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Input(format!("CHARMAX_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Input(format!("cannot configure worker threads: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Verify(c) => commands::verify(&c),
        Command::Domain(c) => commands::domain(&c),
        Command::Query(q) => commands::query(&q),
        Command::Characteristics(c) => commands::characteristics(&c),
        Command::Singular(c) => commands::singular(&c),
        Command::Envelope(e) => commands::envelope(&e),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            let (Failure::Input(msg) | Failure::Check(msg)) = &f;
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
