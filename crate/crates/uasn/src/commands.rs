//! The four subcommands as library functions. The binary only parses
//! arguments and prints.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use uasn_core::baselines::Baseline;
use uasn_core::metrics::{normalize, EpisodeResult};
use uasn_core::seeding::derive_seed;
use uasn_core::training::Trainer;

use crate::checkpoint::Checkpoint;
use crate::config::{Config, Overrides};
use crate::eval::{evaluate_method, Method, ParallelEvaluator};
use crate::replay::{self, ReplayReport};
use crate::trace;

const EVALUATE_TAG: u64 = 0x6576_616c_7561_7465;
const COMPARE_TAG: u64 = 0x636f_6d70_6172_65;

pub const METRICS: [&str; 7] = ["capacity_bits", "fairness", "reuse", "waste", "utility", "delivery_ratio", "delivery_delay"];

fn metric(r: &EpisodeResult, name: &str) -> f64 {
    match name {
        "capacity_bits" => r.capacity_bits,
        "fairness" => r.fairness,
        "reuse" => r.reuse,
        "waste" => r.waste,
        "utility" => r.utility,
        "delivery_ratio" => r.delivery_ratio,
        "delivery_delay" => r.delivery_delay.unwrap_or(f64::NAN),
        _ => unreachable!("unknown metric {name}"),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

#[derive(Debug, Clone, Default)]
pub struct TrainArgs {
    pub config: Option<PathBuf>,
    pub overrides: Overrides,
    pub out_dir: PathBuf,
    /// Also log every k-th training episode; the final episode is always logged.
    pub trace_every: Option<u64>,
    /// Print a progress line after every evaluation.
    pub verbose: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainManifest {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub strategy: String,
    pub reward: String,
    pub n_pairs: usize,
    pub total_episodes: u64,
    pub selected_episode: Option<u64>,
    pub checkpoint: String,
    pub final_checkpoint: String,
    pub curriculum_csv: String,
    pub episodes_csv: String,
    pub traces: String,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub manifest: TrainManifest,
    pub checkpoint: PathBuf,
    pub final_checkpoint: PathBuf,
    pub traces: PathBuf,
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct EpisodeRow {
    config_hash: String,
    seed: u64,
    episode: u64,
    malfunction_rate: f64,
    exploration: f64,
    total_reward: f64,
    utility: f64,
    lifetime_violated: bool,
    loss: Option<f64>,
}

#[derive(Serialize)]
struct CurriculumRow {
    config_hash: String,
    seed: u64,
    episode: u64,
    epsilon: f64,
    mean_reward: f64,
    mean_utility: f64,
}

pub fn train(args: &TrainArgs) -> Result<TrainSummary> {
    let mut config = Config::load_or_default(args.config.as_deref())?;
    config.apply_training(&args.overrides)?;
    let hash = config.hash();
    let out = &args.out_dir;
    create_dir(out)?;
    fs::write(out.join("config.toml"), config.to_toml_string()?)?;

    let mut episodes_csv = csv::Writer::from_path(out.join("episodes.csv"))?;
    let traces_path = out.join("traces.jsonl");
    let mut traces = std::io::BufWriter::new(fs::File::create(&traces_path)?);
    let total = config.curriculum.total_episodes;
    let every = args.trace_every;

    let mut trainer = Trainer::new(config.env_config(), config.trainer.clone(), config.curriculum, config.seed)?
        .with_evaluator(Box::new(ParallelEvaluator));
    let mut failure: Option<anyhow::Error> = None;
    let outcome = trainer.run_traced(
        &mut |ep| ep == total || every.is_some_and(|k| k > 0 && ep % k == 0),
        &mut |log, tr| {
            if failure.is_some() {
                return;
            }
            let row = EpisodeRow {
                config_hash: hash.clone(),
                seed: config.seed,
                episode: log.episode,
                malfunction_rate: log.malfunction_rate,
                exploration: log.exploration,
                total_reward: log.total_reward,
                utility: log.utility,
                lifetime_violated: log.lifetime_violated,
                loss: log.loss,
            };
            let mut res = episodes_csv.serialize(row).map_err(anyhow::Error::from);
            if let (Ok(()), Some(tr)) = (&res, tr) {
                res = trace::write_episode(&mut traces, &tr, &hash, Some(log.episode)).map_err(Into::into);
            }
            if let Err(e) = res {
                failure = Some(e);
            }
            if let (true, Some(p)) = (args.verbose, log.evaluation) {
                eprintln!(
                    "episode {:>7}  eps {:.4}  explore {:.3}  mean reward {:>8.3}  mean utility {:.4}",
                    p.episode, p.epsilon, log.exploration, p.mean_reward, p.mean_utility
                );
            }
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    episodes_csv.flush()?;
    traces.flush()?;

    let mut cur = csv::Writer::from_path(out.join("curriculum.csv"))?;
    for p in &outcome.trace {
        cur.serialize(CurriculumRow {
            config_hash: hash.clone(),
            seed: config.seed,
            episode: p.episode,
            epsilon: p.epsilon,
            mean_reward: p.mean_reward,
            mean_utility: p.mean_utility,
        })?;
    }
    cur.flush()?;

    let save = |params: &[f64], name: &str| -> Result<PathBuf> {
        let path = out.join(name);
        Checkpoint {
            shape: outcome.shape,
            n_pairs: config.world.n_pairs,
            seed: config.seed,
            config_hash: config.hash_bytes(),
            params: params.to_vec(),
        }
        .save(&path)?;
        Ok(path)
    };
    let checkpoint = save(&outcome.params, "checkpoint.bin")?;
    let final_checkpoint = save(&outcome.final_params, "checkpoint-final.bin")?;

    let manifest = TrainManifest {
        config_hash: hash,
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION").into(),
        strategy: config.curriculum.kind.name().into(),
        reward: config.env.reward.name().into(),
        n_pairs: config.world.n_pairs,
        total_episodes: total,
        selected_episode: outcome.selected_episode,
        checkpoint: "checkpoint.bin".into(),
        final_checkpoint: "checkpoint-final.bin".into(),
        curriculum_csv: "curriculum.csv".into(),
        episodes_csv: "episodes.csv".into(),
        traces: "traces.jsonl".into(),
    };
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(TrainSummary { manifest, checkpoint, final_checkpoint, traces: traces_path, out_dir: out.clone() })
}

#[derive(Debug, Clone, Default)]
pub struct EvaluateArgs {
    pub config: Option<PathBuf>,
    pub overrides: Overrides,
    pub checkpoint: Option<PathBuf>,
    pub baseline: Option<String>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub label: String,
    pub config_hash: String,
    pub seed: u64,
    pub malfunction_rate: f64,
    pub n_pairs: usize,
    pub seeds: Vec<u64>,
    pub runs: Vec<EpisodeResult>,
    pub mean: EpisodeResult,
}

/// Seeds shared by every evaluation under the same master seed.
pub fn evaluation_seeds(master: u64, runs: usize) -> Vec<u64> {
    (0..runs as u64).map(|r| derive_seed(master, &[EVALUATE_TAG, r])).collect()
}

pub fn evaluate(args: &EvaluateArgs) -> Result<EvaluationReport> {
    let mut config = Config::load_or_default(args.config.as_deref())?;
    let (label, method) = match (&args.checkpoint, &args.baseline) {
        (Some(path), None) => {
            let c = Checkpoint::load(path).with_context(|| format!("cannot load checkpoint {}", path.display()))?;
            if args.overrides.pairs.is_none() {
                config.world.n_pairs = c.n_pairs;
            }
            (path.display().to_string(), Method::from_checkpoint(&c))
        }
        (None, Some(name)) => {
            let b = Baseline::parse(name).ok_or_else(|| anyhow!("unknown baseline '{name}'"))?;
            (b.name().to_string(), Method::Baseline(b))
        }
        _ => bail!("give exactly one of --checkpoint or --baseline"),
    };
    config.apply_evaluation(&args.overrides)?;
    let env = config.env_config();
    let seeds = evaluation_seeds(config.seed, config.evaluation.runs);
    let runs = evaluate_method(&method, &env, &seeds, config.evaluation.iql_train_episodes, config.seed)?;
    let mean = EpisodeResult::mean(&runs).expect("at least one run");
    let report = EvaluationReport {
        label,
        config_hash: config.hash(),
        seed: config.seed,
        malfunction_rate: config.world.malfunction_rate,
        n_pairs: config.world.n_pairs,
        seeds,
        runs,
        mean,
    };
    if let Some(dir) = &args.out_dir {
        create_dir(dir)?;
        write_evaluation_csv(&dir.join("evaluation.csv"), &report)?;
        fs::write(dir.join("evaluation.json"), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}

#[derive(Serialize)]
struct EvaluationRow<'a> {
    config_hash: &'a str,
    master_seed: u64,
    label: &'a str,
    run: String,
    seed: Option<u64>,
    capacity_bits: f64,
    fairness: f64,
    reuse: f64,
    waste: f64,
    utility: f64,
    delivery_ratio: f64,
    delivery_delay: Option<f64>,
    lifetime_slots: usize,
    lifetime_violated: bool,
    total_reward: f64,
}

fn write_evaluation_csv(path: &Path, rep: &EvaluationReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let row = |run: String, seed: Option<u64>, r: &EpisodeResult| EvaluationRow {
        config_hash: &rep.config_hash,
        master_seed: rep.seed,
        label: &rep.label,
        run,
        seed,
        capacity_bits: r.capacity_bits,
        fairness: r.fairness,
        reuse: r.reuse,
        waste: r.waste,
        utility: r.utility,
        delivery_ratio: r.delivery_ratio,
        delivery_delay: r.delivery_delay,
        lifetime_slots: r.lifetime_slots,
        lifetime_violated: r.lifetime_violated,
        total_reward: r.total_reward,
    };
    for (i, (r, s)) in rep.runs.iter().zip(&rep.seeds).enumerate() {
        w.serialize(row(i.to_string(), Some(*s), r))?;
    }
    w.serialize(row("mean".into(), None, &rep.mean))?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct CompareArgs {
    pub config: Option<PathBuf>,
    pub overrides: Overrides,
    /// `label=path-or-baseline` or a bare baseline name. Paths may contain
    /// `{n}`, replaced by the number of pairs of each grid cell.
    pub methods: Vec<String>,
    pub pairs: Vec<usize>,
    pub malfunction_rates: Vec<f64>,
    /// Label of the method every metric is normalised against.
    pub reference: String,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub n_pairs: usize,
    pub malfunction_rate: f64,
    pub method: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub config_hash: String,
    pub seed: u64,
    pub raw: Vec<CompareRow>,
    pub normalized: Vec<CompareRow>,
}

fn parse_method(spec: &str) -> (String, String) {
    match spec.split_once('=') {
        Some((label, target)) => (label.to_string(), target.to_string()),
        None => (spec.to_string(), spec.to_string()),
    }
}

fn resolve_method(target: &str, n: usize) -> Result<Method> {
    if let Some(b) = Baseline::parse(target) {
        return Ok(Method::Baseline(b));
    }
    let path = target.replace("{n}", &n.to_string());
    let c = Checkpoint::load(Path::new(&path)).with_context(|| format!("cannot load checkpoint {path}"))?;
    if c.n_pairs != n {
        bail!("checkpoint {path} was trained with {} pairs, grid cell has {n}", c.n_pairs);
    }
    Ok(Method::from_checkpoint(&c))
}

pub fn compare(args: &CompareArgs) -> Result<CompareReport> {
    let mut config = Config::load_or_default(args.config.as_deref())?;
    config.apply_evaluation(&args.overrides)?;
    let methods: Vec<(String, String)> = args.methods.iter().map(|m| parse_method(m)).collect();
    if !methods.iter().any(|(l, _)| *l == args.reference) {
        bail!("reference '{}' is not among the compared methods", args.reference);
    }
    let pairs = if args.pairs.is_empty() { vec![config.world.n_pairs] } else { args.pairs.clone() };
    let rates = if args.malfunction_rates.is_empty() { vec![config.world.malfunction_rate] } else { args.malfunction_rates.clone() };
    let seeds: Vec<u64> = (0..config.evaluation.runs as u64).map(|r| derive_seed(config.seed, &[COMPARE_TAG, r])).collect();

    let mut raw = Vec::new();
    let mut normalized = Vec::new();
    for &n in &pairs {
        for &eps in &rates {
            let mut cell = config.clone();
            cell.world.n_pairs = n;
            cell.world.malfunction_rate = eps;
            cell.validate()?;
            let env = cell.env_config();
            let mut means = Vec::new();
            for (label, target) in &methods {
                let method = resolve_method(target, n)?;
                let runs = evaluate_method(&method, &env, &seeds, cell.evaluation.iql_train_episodes, cell.seed)?;
                means.push((label.clone(), EpisodeResult::mean(&runs).expect("runs > 0")));
            }
            for name in METRICS {
                let reference = means.iter().find(|(l, _)| *l == args.reference).map(|(_, r)| metric(r, name)).unwrap();
                let best = means.iter().map(|(_, r)| metric(r, name)).filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, f64::max);
                for (label, r) in &means {
                    let x = metric(r, name);
                    let row = |value| CompareRow {
                        n_pairs: n,
                        malfunction_rate: eps,
                        method: label.clone(),
                        metric: name.into(),
                        value,
                    };
                    raw.push(row(x));
                    normalized.push(row(normalize(x, reference, best).unwrap_or(f64::NAN)));
                }
            }
        }
    }
    let report = CompareReport { config_hash: config.hash(), seed: config.seed, raw, normalized };
    if let Some(dir) = &args.out_dir {
        create_dir(dir)?;
        for (name, rows) in [("raw.csv", &report.raw), ("normalized.csv", &report.normalized)] {
            let mut w = csv::Writer::from_path(dir.join(name))?;
            w.write_record(["config_hash", "seed", "n_pairs", "malfunction_rate", "method", "metric", "value"])?;
            for r in rows {
                w.write_record([
                    report.config_hash.clone(),
                    report.seed.to_string(),
                    r.n_pairs.to_string(),
                    r.malfunction_rate.to_string(),
                    r.method.clone(),
                    r.metric.clone(),
                    r.value.to_string(),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(report)
}

/// Verifies every episode in a trace file.
pub fn replay(path: &Path) -> Result<ReplayReport> {
    let episodes = trace::load_episodes(path).with_context(|| format!("cannot read trace {}", path.display()))?;
    Ok(replay::verify(&episodes)?)
}

/// Writes `report` as text, one line per mismatch.
pub fn print_replay<W: Write>(mut w: W, report: &ReplayReport) -> std::io::Result<()> {
    for m in &report.mismatches {
        writeln!(w, "{m}")?;
    }
    writeln!(w, "{} episodes, {} slots, {} mismatches", report.episodes, report.slots, report.mismatches.len())
}

