//! Parallel evaluation: one environment per seed, fanned out over the rayon pool.

use std::sync::Arc;

use rayon::prelude::*;
use uasn_core::agent::NetShape;
use uasn_core::baselines::{Baseline, IndependentQ, IqlConfig};
use uasn_core::env::{Env, EnvConfig};
use uasn_core::metrics::EpisodeResult;
use uasn_core::rollout::{run_episode, Controller, QPolicy};
use uasn_core::training::Evaluator;

use crate::checkpoint::Checkpoint;

/// Something that can be evaluated: a trained network or a named baseline.
#[derive(Debug, Clone)]
pub enum Method {
    Network { shape: NetShape, params: Arc<Vec<f64>> },
    Baseline(Baseline),
}

impl Method {
    pub fn from_checkpoint(c: &Checkpoint) -> Self {
        Self::Network { shape: c.shape, params: Arc::new(c.params.clone()) }
    }
}

fn run_all<F, C>(config: &EnvConfig, seeds: &[u64], make: F) -> uasn_core::Result<Vec<EpisodeResult>>
where
    F: Fn() -> uasn_core::Result<C> + Sync,
    C: Controller,
{
    seeds
        .par_iter()
        .map(|&seed| {
            let mut env = Env::new(config.clone())?;
            let mut ctrl = make()?;
            run_episode(&mut env, &mut ctrl, seed, false).map(|r| r.result)
        })
        .collect()
}

/// Evaluates `method` once per seed. The tabular Q-learner first learns online
/// for `iql_train_episodes` episodes derived from `master_seed`, then is frozen.
pub fn evaluate_method(
    method: &Method,
    config: &EnvConfig,
    seeds: &[u64],
    iql_train_episodes: usize,
    master_seed: u64,
) -> uasn_core::Result<Vec<EpisodeResult>> {
    match method {
        Method::Network { shape, params } => {
            if shape.input != config.observation_dim() || shape.actions != config.n_actions() {
                return Err(uasn_core::Error::Contract(format!(
                    "network expects {} inputs and {} actions, environment provides {} and {}",
                    shape.input,
                    shape.actions,
                    config.observation_dim(),
                    config.n_actions()
                )));
            }
            run_all(config, seeds, || QPolicy::greedy(*shape, Arc::clone(params)))
        }
        Method::Baseline(Baseline::Iql) => {
            let mut q = IndependentQ::new(IqlConfig::default(), config.n_pairs(), config.n_actions(), master_seed);
            let mut env = Env::new(config.clone())?;
            q.train(&mut env, iql_train_episodes, master_seed)?;
            q.freeze();
            run_all(config, seeds, || Ok(q.clone()))
        }
        Method::Baseline(b) => run_all(config, seeds, || Ok(b.controller(config.n_pairs(), config.n_actions(), master_seed))),
    }
}

/// Curriculum evaluator that spreads the evaluation runs over the thread pool.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParallelEvaluator;

impl Evaluator for ParallelEvaluator {
    fn evaluate(
        &self,
        env: &EnvConfig,
        shape: NetShape,
        params: Arc<Vec<f64>>,
        seeds: &[u64],
    ) -> uasn_core::Result<Vec<EpisodeResult>> {
        run_all(env, seeds, || QPolicy::greedy(shape, Arc::clone(&params)))
    }
}
