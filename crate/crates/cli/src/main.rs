use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "superhedge", version, about = "Super-hedge prices and martingale measures for discrete-time evolutions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Price a claim by closed form or by search over spot measures.
    Price(PriceArgs),
    /// Non-arbitrage price interval.
    Interval(IntervalArgs),
    /// Estimate exposure coefficients from a price sample.
    Estimate(EstimateArgs),
    /// Check martingale, equivalence and integral-representation properties.
    Verify(VerifyArgs),
    /// Optional decomposition of a supermartingale surface.
    Decompose(DecomposeArgs),
    /// Brute-force reference computations.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
#[value(rename_all = "snake_case")]
enum PayoffKind {
    Call,
    Put,
    AsianCall,
    AsianPut,
}

impl PayoffKind {
    fn name(self) -> &'static str {
        match self {
            PayoffKind::Call => "call",
            PayoffKind::Put => "put",
            PayoffKind::AsianCall => "asian_call",
            PayoffKind::AsianPut => "asian_put",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Method {
    Closed,
    Exhaustive,
    Grid,
    Ascent,
}

#[derive(Args, Debug)]
struct ClaimArgs {
    /// Model file.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum)]
    payoff: PayoffKind,
    #[arg(long)]
    strike: f64,
}

#[derive(Args, Debug)]
struct PriceArgs {
    #[command(flatten)]
    claim: ClaimArgs,
    #[arg(long, value_enum, default_value = "closed")]
    method: Method,
    /// Shock range searched by grid and ascent methods, as LO,HI.
    #[arg(long, default_value = "-12,12", allow_hyphen_values = true)]
    eps_range: String,
    #[arg(long, default_value_t = 49)]
    grid_points: usize,
    /// Cap on selections evaluated by exhaustive searches.
    #[arg(long)]
    cap: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IntervalArgs {
    #[command(flatten)]
    claim: ClaimArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
#[value(rename_all = "snake_case")]
enum Statistic {
    ConstantOne,
    CappedRatio,
    IdentityTail,
    Custom,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// CSV with header `t,price`.
    #[arg(long)]
    prices: PathBuf,
    #[arg(long, value_enum, default_value = "constant_one")]
    statistic: Statistic,
    /// Tail length for identity_tail.
    #[arg(long)]
    tail_k: Option<usize>,
    /// Comma-separated g_1..g_N for the custom statistic.
    #[arg(long)]
    table: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    tau0: f64,
    /// Estimated model file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Estimation report file.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    model: PathBuf,
    /// Seed for the random α-density.
    #[arg(long, default_value_t = 0)]
    alphas: u64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the mixture density as flat records.
    #[arg(long)]
    density_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[arg(long)]
    model: PathBuf,
    /// Surface file {"floor", "nodes": [{"history", "value"}]}.
    #[arg(long)]
    surface: PathBuf,
    /// Number of random mixture densities to verify against, besides all spot measures.
    #[arg(long, default_value_t = 10)]
    densities: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum OracleCommand {
    /// Maximum spot expectation by brute force over atom pair selections.
    Sup {
        #[command(flatten)]
        claim: ClaimArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Expectation under a random mixture density by naive path summation.
    Expectation {
        #[command(flatten)]
        claim: ClaimArgs,
        #[arg(long, default_value_t = 0)]
        alphas: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random α-density for a model.
    Alpha {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random valid model.
    RandomModel {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        max_steps: usize,
        #[arg(long, default_value_t = 4)]
        max_atoms: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
