//! Front-end for the cat-state interferometry simulator: scenario files,
//! subcommands and deterministic CSV/JSON artifacts.

pub mod commands;
pub mod config;
pub mod output;

use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Parser;

pub use commands::Command;
use config::{Format, ScenarioConfig};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "CATLIFT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "catlift", version, about = "Expansion-protocol cat-state interferometry simulator")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output file. Defaults to `run.out`, then to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format. Defaults to `run.format`.
    #[arg(long, value_enum)]
    pub format: Option<CliFormat>,
    /// Replaces `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum CliFormat {
    Csv,
    Json,
}

impl From<CliFormat> for Format {
    fn from(f: CliFormat) -> Self {
        match f {
            CliFormat::Csv => Format::Csv,
            CliFormat::Json => Format::Json,
        }
    }
}

/// Worker count from `CATLIFT_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(e).context(THREADS_ENV),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => anyhow::bail!("{THREADS_ENV} must be a positive integer, got {v:?}"),
        },
    }
}

/// Parses the scenario, computes the artifact and writes it.
pub fn execute(cli: &Cli) -> Result<()> {
    let mut cfg = ScenarioConfig::load(&cli.config).with_context(|| format!("scenario {}", cli.config.display()))?;
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    let format = cli.format.map(Format::from).unwrap_or(cfg.run.format);
    let out = cli.out.clone().or_else(|| cfg.run.out.clone());

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let table = pool.install(|| commands::run(cli.command, &cfg))?;
    let bytes = table.encode(format)?;
    match out {
        Some(path) => output::write_atomic(&path, &bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&bytes)?;
            Ok(stdout.flush()?)
        }
    }
}
