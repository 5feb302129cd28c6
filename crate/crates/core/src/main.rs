use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tradelab::harness::{
    self, compare_report, read_runs, ttest_csv, write_atomic, ComparisonTable, ExperimentConfig, Strategy, TTestRow,
};

#[derive(Parser)]
#[command(name = "tradelab", version, about = "Single-asset daily trading experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the agents for every seed and write checkpoints.
    Train(RunArgs),
    /// Evaluate saved checkpoints and baselines on the test segment.
    Evaluate(RunArgs),
    /// Train, evaluate and test in one go.
    Compare(RunArgs),
    /// Recompute paired t-tests from an existing runs.csv.
    Ttest(TtestArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(short, long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct Overrides {
    /// Seeds as a comma list or a half-open range, e.g. `0,3,7` or `0..40`.
    #[arg(long, value_parser = parse_seeds)]
    seeds: Option<SeedList>,
    /// Output directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Comma-separated strategy ids.
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<Strategy>>,
}

#[derive(Args)]
struct TtestArgs {
    /// Directory holding runs.csv; ttest.csv is written there.
    #[arg(short, long)]
    out: PathBuf,
    /// Config providing the pairs and significance level.
    #[arg(short, long)]
    config: Option<PathBuf>,
}

#[derive(Clone)]
struct SeedList(Vec<u64>);

fn parse_seeds(s: &str) -> Result<SeedList, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| format!("bad range start: {e}"))?;
        let b: u64 = b.trim().parse().map_err(|e| format!("bad range end: {e}"))?;
        return Ok(SeedList((a..b).collect()));
    }
    s.split(',')
        .map(|p| p.trim().parse::<u64>().map_err(|e| format!("bad seed {p:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(SeedList)
}

fn load_config(path: &Path, overrides: Overrides) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(SeedList(seeds)) = overrides.seeds {
        config.seeds = seeds;
    }
    if let Some(out) = overrides.out {
        config.output_dir = out;
    }
    if let Some(strategies) = overrides.strategies {
        config.strategies = strategies;
    }
    config.validate()?;
    Ok(config)
}

fn print_table(table: &ComparisonTable) {
    println!("{:<12} {:>12} {:>10} {:>6}", "strategy", "return_pct", "sharpe", "runs");
    for row in &table.rows {
        println!(
            "{:<12} {:>12.3} {:>10.3} {:>6}",
            row.strategy,
            row.return_pct,
            row.sharpe,
            row.runs.len()
        );
    }
}

fn print_ttests(rows: &[TTestRow], alpha: f64) {
    for row in rows {
        println!(
            "{} {}: t0 = {:.4}, df = {}, p = {:.6}{}",
            row.pair,
            row.metric.id(),
            row.result.t0,
            row.result.df,
            row.result.p_value,
            if row.rejected {
                format!(" (rejected at {alpha})")
            } else {
                String::new()
            }
        );
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train(args) => {
            let config = load_config(&args.config, args.overrides)?;
            let trained = harness::train_to_dir(&config, &config.output_dir)?;
            for (seed, agents) in trained {
                for (name, log) in [("td3", agents.td3_log), ("tdqn", agents.dqn_log)] {
                    if let Some(log) = log {
                        println!(
                            "seed {seed} {name}: {} updates, best episode {:?}",
                            log.updates, log.best_episode
                        );
                    }
                }
            }
            println!("checkpoints written to {}", config.output_dir.display());
        }
        Command::Evaluate(args) => {
            let config = load_config(&args.config, args.overrides)?;
            let outcome = harness::evaluate_from_dir(&config, &config.output_dir)?;
            print_table(&outcome.table);
            print_ttests(&outcome.ttests, config.alpha_conf);
        }
        Command::Compare(args) => {
            let config = load_config(&args.config, args.overrides)?;
            let outcome = harness::run_experiment(&config)?;
            print_table(&outcome.table);
            print_ttests(&outcome.ttests, config.alpha_conf);
        }
        Command::Ttest(args) => {
            let config = match &args.config {
                Some(path) => ExperimentConfig::load(path)?,
                None => ExperimentConfig::default(),
            };
            let runs = read_runs(&args.out.join("runs.csv"))?;
            let pairs: Vec<_> = config
                .ttest_pairs
                .iter()
                .copied()
                .filter(|p| runs.iter().any(|r| r.strategy == p.x.id()) && runs.iter().any(|r| r.strategy == p.y.id()))
                .collect();
            if pairs.is_empty() {
                bail!("runs.csv holds none of the configured t-test pairs");
            }
            let rows = compare_report(&runs, &pairs, config.alpha_conf)?;
            write_atomic(&args.out.join("ttest.csv"), &ttest_csv(&rows))?;
            print_ttests(&rows, config.alpha_conf);
        }
    }
    Ok(())
}
