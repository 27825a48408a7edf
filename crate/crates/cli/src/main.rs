//! Batch entry point: wires config, data, backends, simulation, and
//! evaluation behind one CLI.

mod artifacts;
mod commands;
mod config;

use anyhow::Result;
use clap::{Parser, Subcommand};
use config::{Overrides, RunConfig};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "contextsim",
    about = "Context-grounded user-agent simulation for offline recommender evaluation",
    version
)]
struct Cli {
    /// TOML config file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Top-level seed all randomness derives from (mandatory).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for all artifacts.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Parallel agent workers (0 = available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Backend: scripted | http.
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Recommender strategy: random | popularity | mf | external.
    #[arg(long, global = true)]
    strategy: Option<String>,
    /// Number of simulated agents.
    #[arg(long, global = true)]
    agents: Option<usize>,
    /// Interaction variant: sim | sum.
    #[arg(long, global = true)]
    variant: Option<String>,
    /// Dataset field delimiter (e.g. "::" for MovieLens-1M).
    #[arg(long, global = true)]
    delimiter: Option<String>,
    /// Interactions file (user, item, rating, timestamp rows).
    #[arg(long, global = true)]
    interactions: Option<PathBuf>,
    /// Catalog file (delimited or line-JSON items).
    #[arg(long, global = true)]
    catalog: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, filter, and split the dataset; write split manifests.
    Ingest,
    /// Infer personas for the agent population and persist them.
    InitPersonas,
    /// Run the simulation and write trajectory logs.
    Simulate,
    /// Build and export the thought-synthesis corpora.
    ExportThoughts,
    /// Run an evaluation experiment.
    Eval {
        /// alignment | rating | temporal | distribution | ab | matthew |
        /// ablation | actions | judge-prompts | context
        experiment: String,
        /// Real per-strategy metrics JSON (eval ab).
        #[arg(long)]
        real: Option<PathBuf>,
        /// Ground-truth file (eval actions; judge-prompts context kind).
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Predictions file (eval rating / eval actions).
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Judge prompt kind: human_likeness | consistency | context_consistency.
        #[arg(long)]
        kind: Option<String>,
        /// Run the brand-swap condition instead of the exposure boost (eval matthew).
        #[arg(long)]
        brand_swap: bool,
    },
    /// Merge all report_*.json files in the output directory.
    Report,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let overrides = Overrides {
        seed: cli.seed,
        output_dir: cli.output.clone(),
        workers: cli.workers,
        backend: cli.backend.clone(),
        strategy: cli.strategy.clone(),
        agents: cli.agents,
        variant: cli.variant.clone(),
        delimiter: cli.delimiter.clone(),
        interactions: cli.interactions.clone(),
        catalog: cli.catalog.clone(),
    };
    let config = RunConfig::load(cli.config.as_deref(), &overrides)?;
    if config.workers > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(config.workers).build_global().ok();
    }
    match &cli.command {
        Command::Ingest => commands::cmd_ingest(&config),
        Command::InitPersonas => commands::cmd_init_personas(&config),
        Command::Simulate => commands::cmd_simulate(&config),
        Command::ExportThoughts => commands::cmd_export_thoughts(&config),
        Command::Eval { experiment, real, truth, predictions, kind, brand_swap } => {
            let inputs = commands::EvalInputs {
                real_metrics: real.clone(),
                truth: truth.clone(),
                predictions: predictions.clone(),
                kind: kind.clone(),
                brand_swap: *brand_swap,
            };
            commands::cmd_eval(&config, experiment, &inputs)
        }
        Command::Report => commands::cmd_report(&config),
    }
}
