use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;
mod manifest;
mod routing_arg;

use routing_arg::RoutingArg;

#[derive(Parser, Debug)]
#[command(name = "routecap", version, about = "Congestion analysis and simulation of static packet routings")]
struct Cli {
    /// Worker threads for sweeps and bisection probes.
    #[arg(long, global = true, env = "ROUTECAP_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a preferential-attachment graph as an edge list.
    Generate(GenerateArgs),
    /// Solve for the occupancy matrix and report capacity, times and bounds.
    Analyze(AnalyzeArgs),
    /// Run one packet simulation.
    Simulate(SimulateArgs),
    /// Simulate over a grid of injection rates and seeds.
    Sweep(SweepArgs),
    /// Locate the congestion transition by bisection on the injection rate.
    EstimateRc(EstimateRcArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    /// Edges attached per new vertex.
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct GraphRouting {
    /// Edge-list file.
    #[arg(long)]
    pub graph: PathBuf,
    /// walk, degree-biased:<beta>, shortest-path or matrix:<path>.
    #[arg(long, default_value = "walk")]
    pub routing: RoutingArg,
}

#[derive(Args, Debug, Serialize)]
pub struct Solver {
    #[arg(long, value_enum, default_value_t = Method::Direct)]
    pub method: Method,
    #[arg(long, default_value_t = routecap::analysis::DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Neumann,
    Lowrank,
}

#[derive(Args, Debug, Serialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: GraphRouting,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: Solver,
    /// JSON report.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional CSV of the occupancy matrix.
    #[arg(long)]
    pub alpha: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct Traffic {
    /// Packets served per vertex per step.
    #[arg(long, default_value_t = 1)]
    pub capacity: usize,
    /// Vertices a packet may not return to.
    #[arg(long)]
    pub avoid: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = routecap::sim::DEFAULT_WARMUP)]
    pub warmup: usize,
    #[arg(long, default_value_t = routecap::sim::DEFAULT_MEASURE)]
    pub measure: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: GraphRouting,
    #[command(flatten)]
    #[serde(flatten)]
    pub traffic: Traffic,
    /// Packets generated per step.
    #[arg(long)]
    pub rate: f64,
    /// JSON result.
    #[arg(long)]
    pub out: PathBuf,
    /// W(t) CSV; defaults to the output path with a `.wt.csv` suffix.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: GraphRouting,
    #[command(flatten)]
    #[serde(flatten)]
    pub traffic: Traffic,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: Solver,
    /// Absolute injection rates, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "relative", required_unless_present = "relative")]
    pub rates: Vec<f64>,
    /// Injection rates as fractions of the analytic capacity, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub relative: Vec<f64>,
    /// Seeds per rate, counted up from --seed.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// CSV output.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct EstimateRcArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: GraphRouting,
    #[command(flatten)]
    #[serde(flatten)]
    pub traffic: Traffic,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: Solver,
    /// Subcritical end of the bracket; defaults to half the analytic capacity.
    #[arg(long)]
    pub low: Option<f64>,
    /// Supercritical end of the bracket; defaults to twice the analytic capacity.
    #[arg(long)]
    pub high: Option<f64>,
    /// Bracket width at which bisection stops; defaults to 1/128 of the bracket.
    #[arg(long)]
    pub resolution: Option<f64>,
    #[arg(long, default_value_t = routecap::sim::DEFAULT_ETA_THRESHOLD)]
    pub threshold: f64,
    /// JSON output.
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(workers) = cli.workers {
        pool = pool.num_threads(workers);
    }
    let pool = match pool.build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(2);
        }
    };
    let result = pool.install(|| match &cli.command {
        Command::Generate(args) => commands::generate(args),
        Command::Analyze(args) => commands::analyze(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Sweep(args) => commands::sweep(args),
        Command::EstimateRc(args) => commands::estimate_rc(args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
