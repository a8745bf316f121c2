mod commands;
mod config;
mod error;
mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::ensemble::EnsembleArgs;
use commands::evaluate::EvaluateArgs;
use commands::leaderboard::LeaderboardCommand;
use commands::postprocess::{ApplyArgs, OptimizeArgs};
use commands::rank::{RankArgs, StabilityArgs};
use config::{Config, CONFIG_ENV};
use error::CliResult;

/// Segmentation metrics, challenge ranking, postprocessing and ensembling for
/// brain tumor label maps.
#[derive(Debug, Parser)]
#[command(name = "brats-eval", version)]
struct Cli {
    /// JSON file with label coding, thresholds and special-case values.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Worker threads for per-case work; defaults to the available parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dice and HD95 per case and region, plus summary statistics.
    Evaluate(EvaluateArgs),
    /// Rank-then-aggregate scores over two or more metrics.csv files.
    Rank(RankArgs),
    /// Leave-one-algorithm-out stability of a ranking.
    Stability(StabilityArgs),
    /// Sweep ET volume thresholds and pick the best by Dice and by rank.
    OptimizePostprocess(OptimizeArgs),
    /// Relabel small ET predictions as necrosis.
    ApplyPostprocess(ApplyArgs),
    /// Average probability maps across models and configurations.
    Ensemble(EnsembleArgs),
    /// Persistent leaderboard store.
    #[command(subcommand)]
    Leaderboard(LeaderboardCommand),
}

fn run(cli: &Cli) -> CliResult<()> {
    let config = Config::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Evaluate(a) => commands::evaluate::run(a, &config, cli.jobs),
        Command::Rank(a) => commands::rank::run_rank(a),
        Command::Stability(a) => commands::rank::run_stability(a),
        Command::OptimizePostprocess(a) => {
            commands::postprocess::run_optimize(a, &config, cli.jobs)
        }
        Command::ApplyPostprocess(a) => commands::postprocess::run_apply(a, &config, cli.jobs),
        Command::Ensemble(a) => commands::ensemble::run(a, &config, cli.jobs),
        Command::Leaderboard(c) => commands::leaderboard::run(c),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category.exit_code())
        }
    }
}
