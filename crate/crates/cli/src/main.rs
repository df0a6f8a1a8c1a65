use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use custmix::clustering::ClusterCount;
use custmix::pipeline::Periodization;
use custmix::simulation::SweepAxis;
use custmix::{ErrorKind, EstimatorKind};

mod commands;
mod output;

#[derive(Parser, Debug)]
#[command(name = "custmix", version, about = "Estimate unique unmonitored customers from transaction logs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cluster, estimate and report unique customers per period.
    Estimate(PipelineArgs),
    /// Hide unflagged monitored customers and score the estimate of their count.
    Validate(ValidateArgs),
    /// Run the Monte Carlo scenarios or a parameter sweep.
    Simulate(SimulateArgs),
    /// Only form basket types and customer segments.
    ClusterOnly(PipelineArgs),
    /// Write a synthetic transaction log with known ground truth.
    Generate(GenerateArgs),
}

#[derive(Args, Debug, Clone)]
struct PipelineArgs {
    /// Transaction log, one product line per row.
    #[arg(long)]
    input: PathBuf,
    /// TOML run configuration; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    period: Option<Periodization>,
    #[arg(long)]
    estimator: Option<EstimatorKind>,
    /// Basket-type count, `auto` or `auto:MIN-MAX`.
    #[arg(long)]
    n_baskets: Option<ClusterCount>,
    /// Customer-segment count, `auto` or `auto:MIN-MAX`.
    #[arg(long)]
    m_segments: Option<ClusterCount>,
    #[arg(long)]
    frequency_cap: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    prior_gamma: Option<Vec<f64>>,
    #[arg(long)]
    delimiter: Option<char>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Two-column file `customer_id,flag`; flagged customers stay visible.
    #[arg(long)]
    flags: PathBuf,
    /// Period lengths to score.
    #[arg(long, value_delimiter = ',', default_value = "month,quarter")]
    periods: Vec<Periodization>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scenario label (`i` to `ix`) or `all`; the base of a sweep when `--sweep` is given.
    #[arg(long)]
    scenario: Option<String>,
    /// TOML scenario definition used instead of the catalog.
    #[arg(long, conflicts_with = "scenario")]
    scenario_file: Option<PathBuf>,
    #[arg(long)]
    sweep: Option<SweepAxis>,
    #[arg(long, value_delimiter = ',', requires = "sweep")]
    grid: Option<Vec<f64>>,
    /// Replications per scenario or sweep point.
    #[arg(long)]
    nu: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Extra estimators evaluated alongside naive and MLE.
    #[arg(long, value_delimiter = ',')]
    extra: Vec<EstimatorKind>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    /// Where to write validation flags of monitored customers.
    #[arg(long)]
    flags_out: Option<PathBuf>,
    /// Where to write true unmonitored counts per month.
    #[arg(long)]
    truth_out: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    scale: usize,
    #[arg(long, default_value_t = 3)]
    months: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Input | ErrorKind::Io => 2,
        ErrorKind::Identifiability => 3,
        ErrorKind::NonConvergence => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(args) => commands::estimate(&args),
        Command::Validate(args) => commands::validate(&args),
        Command::Simulate(args) => commands::simulate(&args),
        Command::ClusterOnly(args) => commands::cluster_only(&args),
        Command::Generate(args) => commands::generate(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
