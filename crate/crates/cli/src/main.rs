mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Genotype selection under a group-coancestry cap: conic relaxations,
/// randomized rounding, and steepest-ascent search.
#[derive(Parser)]
#[command(name = "edopt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance with a relaxation, optionally followed by the
    /// steepest-ascent search.
    Solve(SolveArgs),
    /// Ground-truth optimum of a small instance by enumeration or
    /// branch and bound.
    Oracle(OracleArgs),
    /// Theoretical bracket and sampled expectation of randomized rounding.
    Bounds(BoundsArgs),
    /// Generate a synthetic pedigree and EBV file.
    Gen(GenArgs),
    /// Kinship-system statistics for a pedigree.
    Kinship(KinshipArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// Pedigree CSV (`id,sire,dam`, unknown parent = 0)
    #[arg(long)]
    pedigree: Option<PathBuf>,
    /// EBV CSV (`id,ebv`)
    #[arg(long)]
    ebv: Option<PathBuf>,
    /// Bounds CSV (`id,lower,upper`); absent ids default to [0, 1]
    #[arg(long)]
    bounds: Option<PathBuf>,
    /// Key-value config file supplying any of pedigree/ebv/bounds/n/theta2;
    /// explicit flags win
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of genotypes to select
    #[arg(long)]
    n: Option<usize>,
    /// Group-coancestry cap, supplied as 2θ
    #[arg(long)]
    theta2: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Lp,
    Socp,
    Sdp,
    #[value(name = "lp+sa")]
    LpSa,
    #[value(name = "socp+sa")]
    SocpSa,
    #[value(name = "sdp+sa")]
    SdpSa,
    #[value(name = "round+sa")]
    RoundSa,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, value_enum)]
    method: Method,
    /// Penalty weight; overrides --lambda-mult
    #[arg(long)]
    lambda: Option<f64>,
    /// Penalty weight as a multiple of λ0
    #[arg(long, default_value_t = 2.0)]
    lambda_mult: f64,
    /// Seed for randomized rounding
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rounding samples for the bounds block of SDP methods
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Ascent iteration cap (default 10·|V|)
    #[arg(long)]
    max_iter: Option<usize>,
    /// Conic solver tolerance
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Write the JSON report here
    #[arg(long)]
    json: Option<PathBuf>,
    /// Omit timestamps and timings so reruns are byte-identical
    #[arg(long)]
    no_meta: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Use branch and bound instead of exhaustive enumeration
    #[arg(long)]
    bnb: bool,
    /// Relative gap for branch and bound
    #[arg(long, default_value_t = 0.0)]
    gap: f64,
    /// Time cap in seconds for branch and bound
    #[arg(long, default_value_t = 60.0)]
    time_cap: f64,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    no_meta: bool,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Conic solver tolerance
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    no_meta: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    founders: usize,
    #[arg(long)]
    generations: usize,
    #[arg(long, default_value_t = 2)]
    offspring: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path for the pedigree CSV
    #[arg(long)]
    out_pedigree: PathBuf,
    /// Output path for the EBV CSV
    #[arg(long)]
    out_ebv: PathBuf,
}

#[derive(Args)]
struct KinshipArgs {
    #[arg(long)]
    pedigree: PathBuf,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    no_meta: bool,
}

/// Exit codes: 0 success, 2 infeasible, 3 solver failure, 4 bad input.
pub struct CliError {
    pub code: u8,
    pub msg: String,
}

impl From<edopt::Error> for CliError {
    fn from(e: edopt::Error) -> CliError {
        let code = match &e {
            edopt::Error::Infeasible(_) => 2,
            edopt::Error::SolverFailure(_) | edopt::Error::CapExceeded(_) => 3,
            _ => 4,
        };
        CliError {
            code,
            msg: e.to_string(),
        }
    }
}

impl CliError {
    pub fn bad_input(msg: impl Into<String>) -> CliError {
        CliError {
            code: 4,
            msg: msg.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's own help/version output exits cleanly
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(4);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };

    let outcome = match cli.command {
        Command::Solve(args) => commands::run_solve(args),
        Command::Oracle(args) => commands::run_oracle(args),
        Command::Bounds(args) => commands::run_bounds(args),
        Command::Gen(args) => commands::run_gen(args),
        Command::Kinship(args) => commands::run_kinship(args),
    };

    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {}", err.msg);
            ExitCode::from(err.code)
        }
    }
}
