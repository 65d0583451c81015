//! Command-line driver for the `wmix` library: estimation, verification
//! suites, aggregation experiments, clustering, bound sweeps and potential
//! curves, with JSON/CSV output and a run manifest.

pub mod aggregate;
pub mod config;
pub mod error;
pub mod estimate;
pub mod manifest;
pub mod plot;
pub mod sweep;
pub mod verify;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::BasisMode;
pub use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(
    name = "wmix",
    version,
    about = "Divergences, geometry and aggregation of w-mixtures"
)]
pub struct Cli {
    /// JSON config for the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte-Carlo sample count, overriding the config.
    #[arg(long, global = true)]
    pub samples: Option<u64>,
    /// Write the primary output here and a manifest to `<out>.manifest.json`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte-Carlo f-divergences between two mixtures.
    Estimate,
    /// Identity and inequality suite; exits 1 when any check fails.
    Verify {
        /// Test hook: shifts η of the second mixture on the parametric side.
        #[arg(long, hide = true)]
        corrupt_eta: Option<f64>,
    },
    /// Distributed weight estimation against pooled estimation.
    Aggregate {
        /// Ground-truth mixture as a JSON file.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        shards: Option<usize>,
        #[arg(long, value_enum)]
        basis_mode: Option<BasisMode>,
    },
    /// Bregman k-means over mixture weights.
    Cluster,
    /// Randomized sweep of the bound families; exits 1 on any violation.
    Bounds,
    /// CSV of F*(η) and F(θ(η)) along a grid, for two-component bases.
    PlotPotential,
}

/// Flags shared by every command after parsing.
#[derive(Debug, Clone, Copy, Default)]
pub struct Globals {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub corrupt_eta: Option<f64>,
}

/// What a command produced: primary bytes plus manifest material.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub command: &'static str,
    pub primary: Vec<u8>,
    pub records: serde_json::Value,
    pub config: serde_json::Value,
    pub seed: u64,
    pub failures: usize,
}

impl CommandOutput {
    pub fn json<R: Serialize, C: Serialize>(
        command: &'static str,
        report: &R,
        config: &C,
        seed: u64,
        failures: usize,
    ) -> CliResult<Self> {
        let mut primary = serde_json::to_vec_pretty(report)?;
        primary.push(b'\n');
        Ok(CommandOutput {
            command,
            records: serde_json::to_value(report)?,
            config: serde_json::to_value(config)?,
            primary,
            seed,
            failures,
        })
    }
}

fn execute(cli: &Cli) -> CliResult<CommandOutput> {
    let mut g = Globals {
        seed: cli.seed,
        samples: cli.samples.map(|s| s as usize),
        corrupt_eta: None,
    };
    let path = cli.config.as_deref();
    match &cli.command {
        Command::Estimate => {
            let p = path.ok_or_else(|| CliError::Usage("estimate needs --config".into()))?;
            estimate::run(&config::parse(&std::fs::read_to_string(p)?)?, &g)
        }
        Command::Verify { corrupt_eta } => {
            g.corrupt_eta = *corrupt_eta;
            verify::run(&config::load(path)?, &g)
        }
        Command::Aggregate {
            truth,
            n,
            shards,
            basis_mode,
        } => {
            let mut cfg: config::AggregateConfig = config::load(path)?;
            if let Some(t) = truth {
                cfg.truth = Some(config::parse(&std::fs::read_to_string(t)?)?);
            }
            if let Some(n) = n {
                cfg.n = *n;
            }
            if let Some(s) = shards {
                cfg.shards = *s;
            }
            if let Some(b) = basis_mode {
                cfg.basis_mode = *b;
            }
            aggregate::run_aggregate(&cfg, &g)
        }
        Command::Cluster => aggregate::run_cluster(&config::load(path)?, &g),
        Command::Bounds => sweep::run(&config::load(path)?, &g),
        Command::PlotPotential => plot::run(&config::load(path)?, &g),
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Primary output when no `--out` was given, otherwise empty.
    pub stdout: Vec<u8>,
    /// Failed checks; nonzero maps to exit code 1.
    pub failures: usize,
}

/// Runs a parsed command line and writes `--out` and the manifest.
pub fn run(cli: &Cli) -> CliResult<RunOutcome> {
    let start = Instant::now();
    let output = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(|| execute(cli))?,
        None => execute(cli)?,
    };
    let mut stdout = Vec::new();
    match &cli.out {
        Some(out) => {
            std::fs::write(out, &output.primary)?;
            let manifest = RunManifest::new(
                output.command,
                output.config.clone(),
                output.seed,
                &output.primary,
                output.records.clone(),
                start.elapsed().as_millis(),
            );
            let mut text = serde_json::to_vec_pretty(&manifest)?;
            text.push(b'\n');
            std::fs::write(manifest_path(out), text)?;
        }
        None => stdout = output.primary,
    }
    Ok(RunOutcome {
        stdout,
        failures: output.failures,
    })
}

/// Parses `args` (including the program name) and runs. Returns the exit
/// code and the bytes meant for stdout; diagnostics go to stderr.
pub fn main_with_args<I, T>(args: I) -> (i32, Vec<u8>)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return (code, Vec::new());
        }
    };
    match run(&cli) {
        Ok(o) if o.failures > 0 => {
            eprintln!("wmix: {}", CliError::Failed(o.failures));
            (1, o.stdout)
        }
        Ok(o) => (0, o.stdout),
        Err(e) => {
            eprintln!("wmix: {e}");
            (e.exit_code(), Vec::new())
        }
    }
}
