//! The training loop: a curriculum picks each episode's malfunction rate, the
//! learner plays and updates, and periodic greedy evaluations select the
//! returned checkpoint.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::agent::{LearnerConfig, NetShape, VdnLearner};
use crate::curricula::{Curriculum, CurriculumConfig, CurriculumPoint};
use crate::env::{Env, EnvConfig};
use crate::error::Result;
use crate::metrics::EpisodeResult;
use crate::rollout::{self, EpisodeTrace, QPolicy, TraceHeader};
use crate::seeding::derive_seed;

const TRAIN_TAG: u64 = 0x7472_6169_6e;
const EVAL_TAG: u64 = 0x6576_616c;
const LEARNER_TAG: u64 = 0x6c65_6172_6e;

/// Seed of training episode `episode`.
pub fn train_seed(master: u64, episode: u64) -> u64 {
    derive_seed(master, &[TRAIN_TAG, episode])
}

/// Seeds of the `runs` evaluation episodes of evaluation epoch `epoch`.
pub fn eval_seeds(master: u64, epoch: u64, runs: usize) -> Vec<u64> {
    (0..runs as u64).map(|r| derive_seed(master, &[EVAL_TAG, epoch, r])).collect()
}

/// Plays greedy evaluation episodes of a parameter snapshot.
pub trait Evaluator {
    fn evaluate(&self, env: &EnvConfig, shape: NetShape, params: Arc<Vec<f64>>, seeds: &[u64]) -> Result<Vec<EpisodeResult>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SequentialEvaluator;

impl Evaluator for SequentialEvaluator {
    fn evaluate(&self, env: &EnvConfig, shape: NetShape, params: Arc<Vec<f64>>, seeds: &[u64]) -> Result<Vec<EpisodeResult>> {
        let mut policy = QPolicy::greedy(shape, params)?;
        rollout::evaluate(env, &mut policy, seeds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: u64,
    pub malfunction_rate: f64,
    pub exploration: f64,
    pub total_reward: f64,
    pub utility: f64,
    pub lifetime_violated: bool,
    pub loss: Option<f64>,
    /// Set on episodes followed by an evaluation.
    pub evaluation: Option<CurriculumPoint>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub shape: NetShape,
    /// Parameters returned by the curriculum: best evaluated, or final for SLS.
    pub params: Vec<f64>,
    pub final_params: Vec<f64>,
    /// Episode after which the returned parameters were evaluated, if selected by evaluation.
    pub selected_episode: Option<u64>,
    pub trace: Vec<CurriculumPoint>,
}

pub struct Trainer {
    env: Env,
    env_config: EnvConfig,
    learner: VdnLearner,
    curriculum: Curriculum,
    evaluator: Box<dyn Evaluator + Send + Sync>,
    seed: u64,
    best_params: Option<(u64, Vec<f64>)>,
}

impl Trainer {
    pub fn new(env_config: EnvConfig, learner_config: LearnerConfig, curriculum: CurriculumConfig, seed: u64) -> Result<Self> {
        let env = Env::new(env_config.clone())?;
        let learner = VdnLearner::new(
            learner_config,
            env_config.n_pairs(),
            env_config.observation_dim(),
            env_config.n_actions(),
            derive_seed(seed, &[LEARNER_TAG]),
        )?;
        Ok(Self {
            env,
            env_config,
            learner,
            curriculum: Curriculum::new(curriculum)?,
            evaluator: Box::new(SequentialEvaluator),
            seed,
            best_params: None,
        })
    }

    pub fn with_evaluator(mut self, evaluator: Box<dyn Evaluator + Send + Sync>) -> Self {
        self.evaluator = evaluator;
        self
    }

    pub fn learner(&self) -> &VdnLearner {
        &self.learner
    }

    pub fn curriculum(&self) -> &Curriculum {
        &self.curriculum
    }

    fn env_at(&self, malfunction_rate: f64) -> EnvConfig {
        let mut c = self.env_config.clone();
        c.world.malfunction_rate = malfunction_rate;
        c
    }

    /// Plays and learns from training episode `episode` (1-indexed), then
    /// evaluates if the curriculum is due. The slot records are kept when
    /// `keep_trace` is set.
    pub fn run_episode(&mut self, episode: u64, keep_trace: bool) -> Result<(EpisodeLog, Option<EpisodeTrace>)> {
        let eps_mal = self.curriculum.begin_episode(episode);
        if self.env.config().world.malfunction_rate != eps_mal {
            self.env = Env::new(self.env_at(eps_mal))?;
        }
        let exploration = self.learner.epsilon();
        let mut obs = self.env.reset(train_seed(self.seed, episode))?;
        self.learner.begin_episode(&obs);
        let mut records = Vec::new();
        while !self.env.is_done() {
            let actions = self.learner.act(&obs, exploration);
            let out = self.env.step(&actions)?;
            let active: Vec<bool> = self.env.world().transmitters.iter().map(|n| !n.malfunction).collect();
            self.learner.record(&out.info.record.actions, &active, out.reward, &out.next_observations, out.done);
            if keep_trace {
                records.push(out.info.record);
            }
            obs = out.next_observations;
        }
        let loss = self.learner.end_episode()?;
        let result = self.env.episode_result()?;
        let trace = keep_trace.then(|| EpisodeTrace { header: TraceHeader::of(&self.env), records });

        let cfg = *self.curriculum.config();
        let evaluation = if cfg.is_update_episode(episode) && cfg.eval_runs > 0 {
            let epoch = episode / cfg.update_cycle;
            let seeds = eval_seeds(self.seed, epoch, cfg.eval_runs);
            let params = Arc::new(self.learner.params().to_vec());
            let results = self.evaluator.evaluate(&self.env_at(eps_mal), self.learner.shape(), params, &seeds)?;
            let n = results.len() as f64;
            let mean_reward = results.iter().map(|r| r.total_reward).sum::<f64>() / n;
            let mean_utility = results.iter().map(|r| r.utility).sum::<f64>() / n;
            if self.curriculum.record_evaluation(episode, mean_reward, mean_utility) {
                self.best_params = Some((episode, self.learner.params().to_vec()));
            }
            self.curriculum.trace().last().copied()
        } else {
            None
        };

        let log = EpisodeLog {
            episode,
            malfunction_rate: eps_mal,
            exploration,
            total_reward: result.total_reward,
            utility: result.utility,
            lifetime_violated: result.lifetime_violated,
            loss,
            evaluation,
        };
        Ok((log, trace))
    }

    /// Runs every configured episode.
    pub fn run(&mut self, on_episode: &mut dyn FnMut(&EpisodeLog)) -> Result<TrainOutcome> {
        self.run_traced(&mut |_| false, &mut |log, _| on_episode(log))
    }

    /// Runs every configured episode, keeping slot records of the episodes
    /// selected by `trace_if`.
    pub fn run_traced(
        &mut self,
        trace_if: &mut dyn FnMut(u64) -> bool,
        on_episode: &mut dyn FnMut(&EpisodeLog, Option<EpisodeTrace>),
    ) -> Result<TrainOutcome> {
        for episode in 1..=self.curriculum.config().total_episodes {
            let (log, trace) = self.run_episode(episode, trace_if(episode))?;
            on_episode(&log, trace);
        }
        Ok(self.outcome())
    }

    pub fn outcome(&self) -> TrainOutcome {
        let final_params = self.learner.params().to_vec();
        let (params, selected_episode) = match (&self.best_params, self.curriculum.config().kind.selects_best()) {
            (Some((ep, p)), true) => (p.clone(), Some(*ep)),
            _ => (final_params.clone(), None),
        };
        TrainOutcome {
            shape: self.learner.shape(),
            params,
            final_params,
            selected_episode,
            trace: self.curriculum.trace().to_vec(),
        }
    }
}
