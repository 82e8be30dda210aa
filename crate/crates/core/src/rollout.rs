//! Running complete episodes with a pluggable joint-action controller.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::acoustics::ChannelParams;
use crate::agent::{epsilon_greedy, NetShape};
use crate::env::{Env, EnvConfig, Observation, SlotRecord, StepOutcome};
use crate::error::{Error, Result};
use crate::metrics::EpisodeResult;
use crate::seeding::{rng_from_seed, SimRng};

/// Produces one action index per transmitter each slot.
pub trait Controller {
    fn name(&self) -> String;

    /// Called after every environment reset.
    fn reset(&mut self, env: &Env);

    fn act(&mut self, env: &Env, obs: &[Observation]) -> Vec<usize>;

    fn observe(&mut self, _env: &Env, _outcome: &StepOutcome) {}
}

impl<C: Controller + ?Sized> Controller for Box<C> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn reset(&mut self, env: &Env) {
        (**self).reset(env)
    }

    fn act(&mut self, env: &Env, obs: &[Observation]) -> Vec<usize> {
        (**self).act(env, obs)
    }

    fn observe(&mut self, env: &Env, outcome: &StepOutcome) {
        (**self).observe(env, outcome)
    }
}

/// Episode-level context needed to recompute a logged episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub seed: u64,
    pub env: EnvConfig,
    /// Channel parameters in effect during the episode, wind included.
    pub channel: ChannelParams,
}

impl TraceHeader {
    pub fn of(env: &Env) -> Self {
        Self { seed: env.seed(), env: env.config().clone(), channel: *env.channel() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub header: TraceHeader,
    pub records: Vec<SlotRecord>,
}

#[derive(Debug, Clone)]
pub struct EpisodeRun {
    pub result: EpisodeResult,
    pub header: TraceHeader,
    /// Per-slot records; empty unless requested.
    pub records: Vec<SlotRecord>,
}

impl EpisodeRun {
    pub fn into_trace(self) -> EpisodeTrace {
        EpisodeTrace { header: self.header, records: self.records }
    }
}

/// Resets `env` with `seed` and plays one episode to completion.
pub fn run_episode<C: Controller + ?Sized>(env: &mut Env, ctrl: &mut C, seed: u64, keep_records: bool) -> Result<EpisodeRun> {
    let mut obs = env.reset(seed)?;
    ctrl.reset(env);
    let mut records = Vec::new();
    while !env.is_done() {
        let actions = ctrl.act(env, &obs);
        let out = env.step(&actions)?;
        ctrl.observe(env, &out);
        if keep_records {
            records.push(out.info.record.clone());
        }
        obs = out.next_observations;
    }
    Ok(EpisodeRun { result: env.episode_result()?, header: TraceHeader::of(env), records })
}

/// Runs one episode per seed on a fresh environment built from `config`.
pub fn evaluate<C: Controller + ?Sized>(config: &EnvConfig, ctrl: &mut C, seeds: &[u64]) -> Result<Vec<EpisodeResult>> {
    let mut env = Env::new(config.clone())?;
    seeds.iter().map(|&s| run_episode(&mut env, ctrl, s, false).map(|r| r.result)).collect()
}

/// ε-greedy execution of a frozen Q-network; every agent keeps its own hidden state.
#[derive(Debug, Clone)]
pub struct QPolicy {
    shape: NetShape,
    params: Arc<Vec<f64>>,
    epsilon: f64,
    hidden: Vec<Vec<f64>>,
    rng: SimRng,
}

impl QPolicy {
    pub fn new(shape: NetShape, params: Arc<Vec<f64>>, epsilon: f64) -> Result<Self> {
        if params.len() != shape.n_params() {
            return Err(Error::contract("parameter vector does not match the network shape"));
        }
        Ok(Self { shape, params, epsilon, hidden: Vec::new(), rng: rng_from_seed(0, 3) })
    }

    pub fn greedy(shape: NetShape, params: Arc<Vec<f64>>) -> Result<Self> {
        Self::new(shape, params, 0.0)
    }

    pub fn shape(&self) -> NetShape {
        self.shape
    }
}

impl Controller for QPolicy {
    fn name(&self) -> String {
        "drqn-vdn".into()
    }

    fn reset(&mut self, env: &Env) {
        self.hidden = vec![self.shape.zero_hidden(); env.n_pairs()];
        self.rng = rng_from_seed(env.seed(), 3);
    }

    fn act(&mut self, _env: &Env, obs: &[Observation]) -> Vec<usize> {
        obs.iter()
            .enumerate()
            .map(|(i, o)| {
                let (q, h) = self.shape.forward(&self.params, &o.0, &self.hidden[i]);
                self.hidden[i] = h;
                epsilon_greedy(&q, self.epsilon, &mut self.rng)
            })
            .collect()
    }
}
