//! `gasfee` command-line front end.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::commands::{EstimateArgs, IngestArgs, MechanismArgs, PriceArgs, SimulateArgs, SurfaceArgs};
use crate::config::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Gas-fee modelling toolkit: ingestion, estimation, simulation, pricing and
/// fee-mechanism runs. Outputs are tidy CSV or JSON with a provenance header.
#[derive(Debug, Parser)]
#[command(name = "gasfee", version)]
pub struct Cli {
    /// RNG seed (unsigned 64-bit). Echoed into every artifact. [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file, written atomically. Standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format. Default depends on the command.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// JSON or TOML file with command parameters (same names as the flags,
    /// snake_case). Values in the file win over flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print the accepted parameters as JSON and exit.
    #[arg(long, global = true)]
    pub describe: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read a price CSV, optionally resample it, and emit the clean series
    /// (csv) or the series with summary statistics and a log-normal fit (json).
    Ingest(IngestArgs),
    /// Fit the Hurst exponent and the mean-reversion parameters of the log price.
    Estimate(EstimateArgs),
    /// Simulate fractional OU or fBm paths.
    Simulate(SimulateArgs),
    /// Price a degree-day option, in closed form or by Monte Carlo.
    Price(PriceArgs),
    /// Closed-form price surface over initial price and maturity.
    Surface(SurfaceArgs),
    /// Run the multidimensional fee mechanism, or select a single block from a mempool file.
    Mechanism(MechanismArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Estimate(_) => "estimate",
            Command::Simulate(_) => "simulate",
            Command::Price(_) => "price",
            Command::Surface(_) => "surface",
            Command::Mechanism(_) => "mechanism",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.describe {
        let mut text = config::describe(&Cli::command(), cli.command.as_ref().map(Command::name));
        text.push('\n');
        return output::write_stdout(&text);
    }
    let Some(command) = cli.command else {
        return Err(CliError::Usage("a command is required; see --help".into()));
    };
    let file = cli.config.as_deref().map(config::load_file).transpose()?;
    let globals = config::Globals::resolve(cli.seed, cli.out, cli.format, file.as_ref())?;
    let params = file.map(|f| f.params).unwrap_or_default();
    let schema = config::param_names(&Cli::command(), command.name());
    let artifact = match command {
        Command::Ingest(a) => commands::ingest(config::merge(&a, &params, &schema)?, &globals)?,
        Command::Estimate(a) => commands::estimate(config::merge(&a, &params, &schema)?, &globals)?,
        Command::Simulate(a) => commands::simulate(config::merge(&a, &params, &schema)?, &globals)?,
        Command::Price(a) => commands::price(config::merge(&a, &params, &schema)?, &globals)?,
        Command::Surface(a) => commands::surface(config::merge(&a, &params, &schema)?, &globals)?,
        Command::Mechanism(a) => commands::mechanism(config::merge(&a, &params, &schema)?, &globals)?,
    };
    output::emit(&artifact, globals.out.as_deref())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{report}");
            ExitCode::from(e.exit_code())
        }
    }
}
