//! Command-line simulator for the truthful data-sharing mechanisms.
//!
//! Exit codes: 0 success, 1 validation error (config/embeddings),
//! 2 verification-criterion failure, 3 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cvmshare::config::{load_config, ExperimentKind, RunConfig};
use cvmshare::embeddings::load_embeddings;
use cvmshare::experiment::{run_experiment, write_reports};
use cvmshare::verify::{run_suite, VerifyLevel};

#[derive(Parser)]
#[command(name = "cvmsim", version, about = "Truthful data-sharing mechanism simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Run configuration file (key = value lines).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the config's Monte-Carlo trial count.
    #[arg(long)]
    trials: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scalar loss-grid experiment from a config file.
    Simulate(RunArgs),
    /// Run an embedding experiment (synthetic generator or ingested file).
    EmbedRun {
        #[command(flatten)]
        run: RunArgs,
        /// Embedding table: `agent,label,e0,...` rows.
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Run the marketplace calibration demo.
    Marketplace(RunArgs),
    /// Run the federated allocation demo.
    Federated(RunArgs),
    /// Run the verification suite.
    Verify {
        /// fast: reduced budgets; full: the stated budgets.
        #[arg(long, default_value = "fast")]
        level: String,
    },
}

fn apply_overrides(mut cfg: RunConfig, args: &RunArgs) -> RunConfig {
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out_dir) = &args.out_dir {
        cfg.out_dir = out_dir.clone();
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    cfg
}

fn expect_kind(cfg: &RunConfig, expected: ExperimentKind) -> anyhow::Result<()> {
    if cfg.experiment != expected {
        anyhow::bail!(
            "this subcommand runs {} experiments but the config says {}",
            expected.name(),
            cfg.experiment.name()
        );
    }
    Ok(())
}

fn run(args: &RunArgs, expected: ExperimentKind, embeddings: Option<&PathBuf>) -> anyhow::Result<()> {
    let cfg = load_config(&args.config).map_err(validation)?;
    expect_kind(&cfg, expected)?;
    let cfg = apply_overrides(cfg, args);
    let table = match embeddings {
        Some(path) => Some(load_embeddings(path).map_err(validation)?),
        None => None,
    };
    let report = run_experiment(&cfg, table.as_ref())?;
    let written = write_reports(&report, &cfg.out_dir)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    if let Some(market) = &report.market {
        println!(
            "n* = {}, alpha = {:.6}, buyer charge = {:.3}",
            market.calibration.n_star, market.calibration.alpha, market.buyer_charge
        );
    }
    if let Some(agents) = &report.federated {
        for a in agents {
            println!(
                "agent {}: alpha = {:.4}, tau = {:.5}, allocation = {}{}",
                a.agent,
                a.alpha,
                a.tau,
                a.allocation_size,
                if a.floored { " (floored)" } else { "" }
            );
        }
    }
    Ok(())
}

/// Marker for errors that should exit with status 1.
#[derive(Debug)]
struct ValidationError(anyhow::Error);

fn validation(err: impl std::error::Error + Send + Sync + 'static) -> anyhow::Error {
    anyhow::Error::new(ValidationError(anyhow::Error::new(err)))
}

impl std::fmt::Display for ValidationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ValidationError {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => run(args, ExperimentKind::Synthetic, None),
        Command::EmbedRun { run: args, embeddings } => {
            run(args, ExperimentKind::Embedding, embeddings.as_ref())
        }
        Command::Marketplace(args) => run(args, ExperimentKind::Marketplace, None),
        Command::Federated(args) => run(args, ExperimentKind::Federated, None),
        Command::Verify { level } => {
            let level = match level.as_str() {
                "fast" => VerifyLevel::Fast,
                "full" => VerifyLevel::Full,
                other => {
                    eprintln!("unknown level {other:?} (use fast or full)");
                    return ExitCode::from(1);
                }
            };
            let report = run_suite(level);
            print!("{}", report.render());
            return if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(2) };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<ValidationError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

