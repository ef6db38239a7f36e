//! Command-line surface.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "tetralab",
    version,
    about = "Numerical laboratory for Toeplitz operators on the Hardy space of the tetrablock"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Fill the deterministic moment cache and write it as CSV.
    Moments(MomentsArgs),
    /// Build the ladder orthonormal basis and write it as JSON.
    Basis(BasisArgs),
    /// Check the coordinate-tuple relations entrywise.
    Relations(RelationsArgs),
    /// Brown-Halmos residuals of a symbol window or a matrix file.
    #[command(name = "bh-check")]
    BhCheck(BhCheckArgs),
    /// Ladder-shift invariance of a symbol's window entries.
    Ladder(LadderArgs),
    /// Decay profile of a symbol's entries along the ladder.
    Probe(ProbeArgs),
    /// Least-squares symbol recovery from an operator window.
    Recover(RecoverArgs),
    /// Sample boundary points from the circular orthogonal ensemble.
    #[command(name = "coe-sample")]
    CoeSample(CoeSampleArgs),
}

#[derive(Args)]
pub struct MomentsArgs {
    /// Largest combined monomial degree to tabulate.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(2..=64))]
    pub max_degree: u32,
    /// Output CSV path.
    #[arg(long, default_value = "moments.csv")]
    pub out: PathBuf,
    #[command(flatten)]
    pub io: CommonIoProxy,
}

#[derive(Args)]
pub struct BasisArgs {
    /// Largest graded degree to orthonormalize.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..=20))]
    pub max_degree: u32,
    /// Output basis JSON path.
    #[arg(long, default_value = "basis.json")]
    pub out: PathBuf,
    /// Orthonormality tolerance.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[command(flatten)]
    pub io: CommonIoProxy,
}

#[derive(Args)]
pub struct RelationsArgs {
    /// Largest test-vector degree.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..=16))]
    pub max_degree: u32,
    /// Residual tolerance.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Basis JSON to load instead of rebuilding.
    #[arg(long)]
    pub basis: Option<PathBuf>,
    #[command(flatten)]
    pub io: CommonIoProxy,
}

#[derive(Args)]
pub struct BhCheckArgs {
    /// Symbol in the mini-language (mutually exclusive with --matrix).
    #[arg(long)]
    pub symbol: Option<String>,
    /// Operator window JSON file to test instead of a symbol.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Largest test-vector degree; the window extends two degrees further.
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u32).range(1..=14))]
    pub max_degree: u32,
    /// Residual tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Basis JSON to load instead of rebuilding.
    #[arg(long)]
    pub basis: Option<PathBuf>,
    #[command(flatten)]
    pub io: CommonIoProxy,
}

#[derive(Args)]
pub struct LadderArgs {
    /// Symbol in the mini-language.
    #[arg(long)]
    pub symbol: String,
    /// Largest shifted degree.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..=16))]
    pub max_degree: u32,
    /// Check shifts r = 0..=R.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(0..=8))]
    pub r: u32,
    /// Deviation tolerance.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Basis JSON to load instead of rebuilding.
    #[arg(long)]
    pub basis: Option<PathBuf>,
    #[command(flatten)]
    pub io: CommonIoProxy,
}

#[derive(Args)]
pub struct ProbeArgs {
    /// Symbol in the mini-language.
    #[arg(long)]
    pub symbol: String,
    /// Largest shifted degree; seeds live in degrees 1..=5.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..=16))]
    pub max_degree: u32,
    /// Decay CSV output path.
    #[arg(long, default_value = "decay.csv")]
    pub out: PathBuf,
    /// Minimal allowed profile(min)/profile(0) ratio for a nonzero symbol.
    #[arg(long, default_value_t = 0.1)]
    pub min_ratio: f64,
    /// Basis JSON to load instead of rebuilding.
    #[arg(long)]
    pub basis: Option<PathBuf>,
    #[command(flatten)]
    pub io: CommonIoProxy,
}

#[derive(Args)]
pub struct RecoverArgs {
    /// Symbol to round-trip (mutually exclusive with --matrix).
    #[arg(long)]
    pub symbol: Option<String>,
    /// Operator window JSON file to recover from.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Largest test-vector degree; the fit runs on the window two degrees
    /// larger.
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u32).range(1..=12))]
    pub max_degree: u32,
    /// Bound on a+b and |k| of dictionary terms.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(0..=6))]
    pub dict_degree: u32,
    /// Residual certifying the window as Toeplitz.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Basis JSON to load instead of rebuilding.
    #[arg(long)]
    pub basis: Option<PathBuf>,
    #[command(flatten)]
    pub io: CommonIoProxy,
}

#[derive(Args)]
pub struct CoeSampleArgs {
    /// Number of boundary samples.
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path.
    #[arg(long, default_value = "samples.csv")]
    pub out: PathBuf,
    /// Also write the report JSON to this path.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Flattened common IO flags. Kept as a separate struct so commands can
/// reach `args.io.cache` etc. uniformly.
#[derive(Args)]
pub struct CommonIoProxy {
    /// Moment cache CSV to load (if present) and update afterwards.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Override for the quadrature max degree.
    #[arg(long)]
    pub quad_degree: Option<u32>,
    /// Also write the report JSON to this path (it always goes to stdout).
    #[arg(long)]
    pub report: Option<PathBuf>,
}
