//! `flowcap`: simulate, sweep, ingest and analyze link samples.

mod commands;
mod config;
mod error;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flowcap::netflow::Direction;

#[derive(Debug, Parser)]
#[command(name = "flowcap", version, about = "Flow-level link capacity analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation and compare its moments with theory.
    Simulate(SimulateArgs),
    /// Run a processor-sharing load sweep over several arrival rates.
    Sweep(SweepArgs),
    /// Aggregate NetFlow v5 datagrams into link samples.
    Ingest(IngestArgs),
    /// Fit the working area and saturation lines to link samples.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set model.lambda=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Theoretical moments to report: any of mean_rate, rate_variance, mean_active_flows.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "mean_rate,rate_variance,mean_active_flows"
    )]
    pub moments: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Comma separated arrival rates, flows/s.
    #[arg(long, value_delimiter = ',', required = true)]
    pub lambdas: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["listen", "from"]))]
pub struct IngestArgs {
    /// UDP address to receive datagrams on.
    #[arg(long, value_name = "ADDR:PORT")]
    pub listen: Option<SocketAddr>,
    /// Capture files of length-prefixed datagrams.
    #[arg(long, value_name = "FILE", num_args = 1..)]
    pub from: Vec<PathBuf>,
    /// Link capacity, bits/s.
    #[arg(long)]
    pub capacity: f64,
    /// Aggregation interval, whole seconds.
    #[arg(long, default_value_t = 1800)]
    pub interval: u64,
    /// Keep only records on these interface indexes.
    #[arg(long, value_delimiter = ',')]
    pub interfaces: Vec<u16>,
    /// Which interface field `--interfaces` applies to: input, output or both.
    #[arg(long, default_value = "both")]
    pub direction: Direction,
    /// Scale octets by the exporter's sampling rate.
    #[arg(long)]
    pub apply_sampling: bool,
    /// Live mode: intervals kept open behind the newest record.
    #[arg(long, default_value_t = 1)]
    pub lateness: u64,
    /// Live mode: stop after this many seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Live mode: stop after this many datagrams.
    #[arg(long)]
    pub max_datagrams: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Samples CSV (`timestamp,utilization_percent,active_flows`).
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate::run(&args),
        Command::Sweep(args) => commands::sweep::run(&args),
        Command::Ingest(args) => commands::ingest::run(&args),
        Command::Analyze(args) => commands::analyze::run(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("flowcap: {e}");
            e.exit_code()
        }
    }
}
