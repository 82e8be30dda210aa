use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand};
use uasn::commands::{self, CompareArgs, EvaluateArgs, TrainArgs};
use uasn::Overrides;
use uasn_core::curricula::CurriculumKind;
use uasn_core::env::RewardKind;

/// Simulate and train power control for underwater acoustic sensor networks.
#[derive(Parser)]
#[command(name = "uasn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a recurrent value-decomposition policy under a malfunction curriculum.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_strategy)]
        strategy: Option<CurriculumKind>,
        /// Training episodes.
        #[arg(long)]
        episodes: Option<u64>,
        /// Fixed rate for pls, upper bound for sls and rls.
        #[arg(long)]
        malfunction_rate: Option<f64>,
        /// Also write the trace of every k-th training episode.
        #[arg(long)]
        trace_every: Option<u64>,
        #[arg(long, default_value = "runs/train")]
        out_dir: PathBuf,
        #[arg(long, short)]
        verbose: bool,
    },
    /// Evaluate a checkpoint or a baseline on derived seeds.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, conflicts_with = "baseline", required_unless_present = "baseline")]
        checkpoint: Option<PathBuf>,
        /// greedy, random, n-tdma, silent or iql.
        #[arg(long)]
        baseline: Option<String>,
        /// Malfunction rate of the evaluation world.
        #[arg(long)]
        malfunction_rate: Option<f64>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Evaluate several methods over a grid of network sizes and malfunction
    /// rates and normalise every metric against a reference method.
    Compare {
        #[command(flatten)]
        common: Common,
        /// `label=checkpoint-path` (may contain `{n}`), `label=baseline` or a baseline name.
        #[arg(long = "method", required = true)]
        methods: Vec<String>,
        #[arg(long)]
        reference: String,
        /// Comma-separated network sizes of the grid.
        #[arg(long = "grid-pairs", value_delimiter = ',')]
        grid_pairs: Vec<usize>,
        /// Comma-separated malfunction rates of the grid.
        #[arg(long = "grid-malfunction-rates", value_delimiter = ',')]
        grid_rates: Vec<f64>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Recompute a logged trace and report every disagreement.
    Replay { trace: PathBuf },
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults apply to every missing key.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_reward)]
    reward: Option<RewardKind>,
    /// Number of transmitter-receiver pairs.
    #[arg(long)]
    pairs: Option<usize>,
}

fn parse_strategy(s: &str) -> Result<CurriculumKind, String> {
    CurriculumKind::parse(s).ok_or_else(|| format!("expected pls, sls, rls or none, got '{s}'"))
}

fn parse_reward(s: &str) -> Result<RewardKind, String> {
    RewardKind::parse(s).ok_or_else(|| format!("expected fr-lh, e-fr-lh or e-fr-ah, got '{s}'"))
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { seed: self.seed, reward: self.reward, pairs: self.pairs, ..Default::default() }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train { common, strategy, episodes, malfunction_rate, trace_every, out_dir, verbose } => {
            let overrides = Overrides { strategy, episodes, malfunction_rate, ..common.overrides() };
            let s = commands::train(&TrainArgs { config: common.config, overrides, out_dir, trace_every, verbose })?;
            println!("config hash {}", s.manifest.config_hash);
            println!("checkpoint  {}", s.checkpoint.display());
            if let Some(ep) = s.manifest.selected_episode {
                println!("selected    episode {ep}");
            }
            println!("outputs     {}", s.out_dir.display());
        }
        Command::Evaluate { common, checkpoint, baseline, malfunction_rate, runs, out_dir } => {
            let overrides = Overrides { malfunction_rate, runs, ..common.overrides() };
            let r = commands::evaluate(&EvaluateArgs { config: common.config, overrides, checkpoint, baseline, out_dir })?;
            println!("{:>4} {:>12} {:>8} {:>8} {:>8} {:>8} {:>8} {:>9}", "run", "capacity", "fair", "reuse", "waste", "utility", "deliv", "reward");
            let line = |tag: String, x: &uasn_core::metrics::EpisodeResult| {
                println!(
                    "{tag:>4} {:>12.1} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>9.3}",
                    x.capacity_bits, x.fairness, x.reuse, x.waste, x.utility, x.delivery_ratio, x.total_reward
                )
            };
            for (i, x) in r.runs.iter().enumerate() {
                line(i.to_string(), x);
            }
            line("mean".into(), &r.mean);
        }
        Command::Compare { common, methods, reference, grid_pairs, grid_rates, runs, out_dir } => {
            let overrides = Overrides { runs, ..common.overrides() };
            let r = commands::compare(&CompareArgs {
                config: common.config,
                overrides,
                methods,
                pairs: grid_pairs,
                malfunction_rates: grid_rates,
                reference,
                out_dir,
            })?;
            println!("{:>3} {:>6} {:<16} {:<16} {:>14} {:>11}", "N", "eps", "method", "metric", "raw", "normalized");
            for (raw, norm) in r.raw.iter().zip(&r.normalized) {
                println!(
                    "{:>3} {:>6} {:<16} {:<16} {:>14.6} {:>11.4}",
                    raw.n_pairs, raw.malfunction_rate, raw.method, raw.metric, raw.value, norm.value
                );
            }
        }
        Command::Replay { trace } => {
            let report = commands::replay(&trace)?;
            commands::print_replay(std::io::stdout().lock(), &report)?;
            if !report.is_clean() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {:#}", anyhow!(e));
            ExitCode::from(2)
        }
    }
}
