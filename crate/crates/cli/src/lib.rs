//! Command-line driver for the sphere-bound pipeline and its finite-graph
//! relatives.
//!
//! Subcommands:
//!
//! * `bound`  — assemble, solve, and certify the spectral upper bound for
//!   orthogonality-avoiding sets on `S^{n-1}`; writes a certification
//!   report, a solution archive, and a machine-readable CSV row.
//! * `cuts`   — validate a boolean-quadratic cut file by exact
//!   enumeration, or generate new cuts against a solved profile.
//! * `finite` — independence-number bounds on small graphs (`alpha`,
//!   `theta`, `lasserre`, `delta`, `gamma`, `polya`).
//! * `export` — write an assembled problem in sparse SDPA format for
//!   external solvers.
//!
//! # Exit codes
//!
//! | code | meaning                                                        |
//! |------|----------------------------------------------------------------|
//! | 0    | success: bound certified / cuts valid / computation finished   |
//! | 2    | command-line usage error                                       |
//! | 3    | input file missing or unparseable (graph, cut, archive)        |
//! | 4    | model assembly failed or parameters outside supported envelope |
//! | 5    | interior-point solve failed                                    |
//! | 6    | certification failed (including a failed independent audit or  |
//! |      | an uncertifiable copositivity shift)                           |
//! | 7    | cut validation failed; the offending cut is named              |
//! | 8    | could not write an output file                                 |
//! | 9    | export self-check mismatch                                     |
//!
//! # Numeric output
//!
//! Human-readable values are printed with 6 fixed decimals, CSV values
//! with 12, both rounded half-to-even — except certified upper bounds,
//! which are always rounded *up* (toward `+∞`) so the printed number
//! remains a valid bound, and error magnitudes, which are printed in
//! scientific notation rounded away from zero.  Output files contain
//! nothing run-dependent (no timestamps, no durations); timing goes to
//! stderr only.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

pub mod bound;
mod cuts;
mod export;
mod finite;
pub mod outfmt;

pub use bound::cmd_bound;
pub use cuts::{cmd_cuts_generate, cmd_cuts_validate};
pub use export::cmd_export;
pub use finite::cmd_finite;

/// Exit code for usage errors (also what clap produces on its own).
pub const EXIT_USAGE: i32 = 2;

/// Classified command failure; each variant maps to one documented exit
/// code (see the crate docs).
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Model(String),
    Solve(String),
    Certify(String),
    InvalidCut(String),
    Output(String),
    CrossCheck(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 3,
            CliError::Model(_) => 4,
            CliError::Solve(_) => 5,
            CliError::Certify(_) => 6,
            CliError::InvalidCut(_) => 7,
            CliError::Output(_) => 8,
            CliError::CrossCheck(_) => 9,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m)
            | CliError::Model(m)
            | CliError::Solve(m)
            | CliError::Certify(m)
            | CliError::InvalidCut(m)
            | CliError::Output(m)
            | CliError::CrossCheck(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "witbound",
    version,
    about = "Certified spectral bounds for orthogonality-avoiding sets, with finite-graph companions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Solve and certify the sphere bound for given n and degree parameter d
    Bound(BoundArgs),
    /// Validate or generate boolean-quadratic cut files
    Cuts {
        #[command(subcommand)]
        sub: CutsCmd,
    },
    /// Independence-number bounds on finite graphs
    Finite {
        #[command(subcommand)]
        sub: FiniteCmd,
    },
    /// Export an assembled problem in sparse SDPA format
    Export(ExportArgs),
}

#[derive(Args)]
pub struct BoundArgs {
    /// Ambient dimension: sets live on the unit sphere of R^n
    #[arg(long)]
    pub n: u32,
    /// Degree parameter: squared polynomials have degree up to 2d
    #[arg(long)]
    pub d: usize,
    /// Cut file(s) to include (repeatable)
    #[arg(long)]
    pub cuts: Vec<PathBuf>,
    /// Largest explicitly sampled degree
    #[arg(long, default_value_t = witbound_core::model::DEFAULT_KMAX)]
    pub kmax: u64,
    /// Working precision in bits
    #[arg(long, default_value_t = 192)]
    pub precision: u32,
    /// Duality-gap tolerance for the interior-point solver
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Seed for the independent random audit
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Starting tail slack; doubled while the cutoff search overruns its cap
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    /// Abandon certification once the tail slack would exceed this
    #[arg(long, default_value_t = 1e-2)]
    pub epsilon_max: f64,
    /// Directory for the report, archive, and CSV outputs
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also write the assembled SDP in sparse SDPA format to this path
    #[arg(long)]
    pub export_sdpa: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum CutsCmd {
    /// Re-check every inequality in a cut file by exact enumeration
    Validate {
        /// Cut file to validate
        #[arg(long)]
        file: PathBuf,
        /// Working precision in bits
        #[arg(long, default_value_t = 192)]
        precision: u32,
    },
    /// Search for violated cuts against a solved coefficient profile
    Generate(GenerateArgs),
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Ambient dimension (required unless --archive is given)
    #[arg(long)]
    pub n: Option<u32>,
    /// Degree parameter (required unless --archive is given)
    #[arg(long)]
    pub d: Option<usize>,
    /// Reuse a solution archive written by `bound` instead of solving
    #[arg(long)]
    pub archive: Option<PathBuf>,
    /// Largest explicitly sampled degree (fresh solves only)
    #[arg(long, default_value_t = witbound_core::model::DEFAULT_KMAX)]
    pub kmax: u64,
    /// Working precision in bits (fresh solves only)
    #[arg(long, default_value_t = 192)]
    pub precision: u32,
    /// Search seed; identical seeds give identical output files
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep at most this many cuts
    #[arg(long, default_value_t = 4)]
    pub max_cuts: usize,
    /// Discard candidates whose violation falls below this
    #[arg(long, default_value_t = 1e-6)]
    pub min_violation: f64,
    /// Cut file to write
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct FiniteCommon {
    /// Graph file: vertex count, then one `u v` edge per line
    #[arg(long)]
    pub graph: PathBuf,
    /// Working precision in bits
    #[arg(long, default_value_t = 128)]
    pub precision: u32,
    /// Duality-gap tolerance for the interior-point solver
    #[arg(long, default_value_t = 1e-11)]
    pub tol: f64,
    /// Write a one-row CSV of the result to this path
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum FiniteCmd {
    /// Exact independence number by branch and bound
    Alpha {
        #[command(flatten)]
        common: FiniteCommon,
    },
    /// Lovász theta number
    Theta {
        #[command(flatten)]
        common: FiniteCommon,
    },
    /// Moment-matrix hierarchy value at a given level
    Lasserre {
        #[command(flatten)]
        common: FiniteCommon,
        /// Hierarchy level k (moment matrices over sets of size <= k)
        #[arg(long, default_value_t = 2)]
        level: usize,
    },
    /// k-point bound conditioned on independent sets
    Delta {
        #[command(flatten)]
        common: FiniteCommon,
        /// Bound level k (conditioning sets of size <= k-2)
        #[arg(long, default_value_t = 3)]
        level: usize,
    },
    /// Tensor-cone upper bound with exponent r
    Gamma {
        #[command(flatten)]
        common: FiniteCommon,
        /// Cone exponent r
        #[arg(long, default_value_t = 1)]
        exponent: u32,
    },
    /// Certified Pólya exponent of the shifted independence kernel
    Polya {
        #[command(flatten)]
        common: FiniteCommon,
        /// Positive rational shift s in (alpha + s)(A + I) - J
        #[arg(long, default_value = "2")]
        shift: String,
    },
}

#[derive(Args)]
pub struct ExportArgs {
    /// Ambient dimension of the sphere problem
    #[arg(long)]
    pub n: Option<u32>,
    /// Degree parameter of the sphere problem
    #[arg(long)]
    pub d: Option<usize>,
    /// Cut file(s) to include (repeatable)
    #[arg(long)]
    pub cuts: Vec<PathBuf>,
    /// Largest explicitly sampled degree
    #[arg(long, default_value_t = witbound_core::model::DEFAULT_KMAX)]
    pub kmax: u64,
    /// Working precision in bits
    #[arg(long, default_value_t = 192)]
    pub precision: u32,
    /// Export the theta problem of this graph instead of the sphere dual
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// File to write (sparse SDPA, `.dat-s`)
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses the process arguments and runs the selected command, returning
/// the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

/// Runs one parsed command.
pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Bound(a) => cmd_bound(a),
        Command::Cuts { sub } => match sub {
            CutsCmd::Validate { file, precision } => cmd_cuts_validate(file, *precision),
            CutsCmd::Generate(a) => cmd_cuts_generate(a),
        },
        Command::Finite { sub } => cmd_finite(sub),
        Command::Export(a) => cmd_export(a),
    }
}
