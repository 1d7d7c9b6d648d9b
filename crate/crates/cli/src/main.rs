use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;
use tractlens_cli::config::RunConfig;
use tractlens_cli::error::{CliError, CliResult};
use tractlens_cli::stages::{self, Context};
use tractlens_cli::synth::write_synth;
use tractlens_core::ingest::synth::{Scenario, SynthOptions};

#[derive(Parser)]
#[command(name = "tractlens", version, about = "Spatial hot spots and interpretable regression for area-level screening rates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long, env = "TRACTLENS_CONFIG")]
    config: PathBuf,
    /// Override a config value, e.g. `--set hotspot.k=6`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write the manifest.
    Pipeline(RunArgs),
    /// Check the input files and write validation.json.
    Validate(RunArgs),
    /// Filter, add accessibility features, summarise and impute.
    Impute(RunArgs),
    /// Getis-Ord Gi* hot and cold spots.
    Hotspot(RunArgs),
    /// Natural-breaks classes and the hot spot map.
    Classify(RunArgs),
    /// Split, grid-search the forest and fit the comparison models.
    Train(RunArgs),
    /// Shapley explanations of the trained forest.
    Explain(RunArgs),
    /// Write a synthetic input set and a config pointing at it.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 400)]
        units: usize,
        #[arg(long, default_value_t = 20)]
        facilities: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// planted_hotspot, linear_response or nonlinear_response.
        #[arg(long, default_value = "planted_hotspot")]
        scenario: String,
        /// No missing cells and no ineligible units.
        #[arg(long)]
        complete: bool,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let (args, stage): (RunArgs, fn(&Context) -> CliResult<()>) = match cli.command {
        Command::Synth { out, units, facilities, seed, scenario, complete } => {
            let scenario: Scenario = scenario.parse().map_err(CliError::config)?;
            let opts = if complete { SynthOptions::complete() } else { SynthOptions::default() };
            return write_synth(&out, units, facilities, seed, scenario, &opts).map_err(CliError::config);
        }
        Command::Pipeline(a) => (a, stages::pipeline),
        Command::Validate(a) => (a, |c| stages::run_stage(c, |c| stages::validate(c).map(|_| ()))),
        Command::Impute(a) => (a, |c| stages::run_stage(c, stages::impute)),
        Command::Hotspot(a) => (a, |c| stages::run_stage(c, stages::hotspot)),
        Command::Classify(a) => (a, |c| stages::run_stage(c, stages::classify)),
        Command::Train(a) => (a, |c| stages::run_stage(c, stages::train)),
        Command::Explain(a) => (a, |c| stages::run_stage(c, stages::explain)),
    };
    let mut cfg = RunConfig::load(&args.config, &args.overrides)?;
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(CliError::config)?;
    let ctx = Context::new(cfg);
    pool.install(|| stage(&ctx))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
