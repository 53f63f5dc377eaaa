//! `megaheat`: run the analysis stages from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use megaheat::pipeline::{run_all, run_stage, ConfigError, RunConfig, Stage};

#[derive(Debug, Parser)]
#[command(name = "megaheat", version, about = "Urban-corridor heat analysis pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration. Without one, a default synthetic world is
    /// analysed.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Worker threads (default: one per core).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Parse inputs, assign stations to regions and form UC/non-UC pairs
    Ingest,
    /// Apply the station-retention rules
    Qc,
    /// Fill gaps: LWMA for daily data, GWR plus kriging for monthly data
    Impute,
    /// Seasonal means and annual heat indices
    Indices,
    /// Station and regional trend tests, proportions of significant trends
    Trends,
    /// Median comparisons between UC and non-UC groups
    Compare,
    /// Rank correlations with the explanatory variables
    Correlate,
    /// Generate the synthetic world described by the config
    Synth,
    /// Figure tables and manifest
    Report,
    /// Every stage in order
    All,
}

impl Command {
    fn stage(self) -> Option<Stage> {
        Some(match self {
            Command::Ingest => Stage::Ingest,
            Command::Qc => Stage::Qc,
            Command::Impute => Stage::Impute,
            Command::Indices => Stage::Indices,
            Command::Trends => Stage::Trends,
            Command::Compare => Stage::Compare,
            Command::Correlate => Stage::Correlate,
            Command::Synth => Stage::Synth,
            Command::Report => Stage::Report,
            Command::All => return None,
        })
    }
}

/// Errors in how the program was invoked.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::from_json(r#"{"synth": {}}"#)?,
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Usage("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| anyhow::anyhow!("starting worker threads: {e}"))?;
    }
    let cfg = load_config(&cli)?;
    log::debug!("config hash {}", cfg.hash());
    match cli.command.stage() {
        Some(stage) => run_stage(stage, &cfg, &cli.out)?,
        None => run_all(&cfg, &cli.out)?,
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<Usage>() || err.is::<ConfigError>() {
        return 1;
    }
    match err.downcast_ref::<megaheat::Error>() {
        Some(e) if !e.is_data_error() => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // library errors already carry their cause in the message
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
