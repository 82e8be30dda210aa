//! Non-learning reference policies, plus a small independent tabular
//! Q-learner used only as a learning sanity check. The Q-learner is not a
//! reproduction of any published learning baseline.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::argmax;
use crate::env::{Env, Observation, StepOutcome};
use crate::rollout::Controller;
use crate::seeding::{derive_seed, rng_from_seed, SimRng};
use crate::world::NodeState;

/// Maximum power unless halted.
pub fn greedy_policy(node: &NodeState, n_actions: usize) -> usize {
    if node.halted {
        0
    } else {
        n_actions - 1
    }
}

/// Uniform over every index, silence included.
pub fn random_policy<R: Rng + ?Sized>(rng: &mut R, n_actions: usize) -> usize {
    rng.random_range(0..n_actions)
}

/// Maximum power in the node's own slot (`slot mod n == id`), silent otherwise.
pub fn ntdma_policy(node_id: usize, slot_index: usize, n: usize, n_actions: usize) -> usize {
    if slot_index % n == node_id {
        n_actions - 1
    } else {
        0
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Greedy;

impl Controller for Greedy {
    fn name(&self) -> String {
        "greedy".into()
    }

    fn reset(&mut self, _env: &Env) {}

    fn act(&mut self, env: &Env, _obs: &[Observation]) -> Vec<usize> {
        env.world().transmitters.iter().map(|n| greedy_policy(n, env.n_actions())).collect()
    }
}

#[derive(Debug, Clone)]
pub struct RandomPower {
    rng: SimRng,
}

impl RandomPower {
    pub fn new() -> Self {
        Self { rng: rng_from_seed(0, 4) }
    }
}

impl Default for RandomPower {
    fn default() -> Self {
        Self::new()
    }
}

impl Controller for RandomPower {
    fn name(&self) -> String {
        "random".into()
    }

    fn reset(&mut self, env: &Env) {
        self.rng = rng_from_seed(env.seed(), 4);
    }

    fn act(&mut self, env: &Env, _obs: &[Observation]) -> Vec<usize> {
        env.world()
            .transmitters
            .iter()
            .map(|n| {
                let a = random_policy(&mut self.rng, env.n_actions());
                if n.halted {
                    0
                } else {
                    a
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NTdma;

impl Controller for NTdma {
    fn name(&self) -> String {
        "n-tdma".into()
    }

    fn reset(&mut self, _env: &Env) {}

    fn act(&mut self, env: &Env, _obs: &[Observation]) -> Vec<usize> {
        let slot = env.slot() + 1;
        let n = env.n_pairs();
        (0..n).map(|i| ntdma_policy(i, slot, n, env.n_actions())).collect()
    }
}

/// Never transmits.
#[derive(Debug, Clone, Copy, Default)]
pub struct Silent;

impl Controller for Silent {
    fn name(&self) -> String {
        "silent".into()
    }

    fn reset(&mut self, _env: &Env) {}

    fn act(&mut self, env: &Env, _obs: &[Observation]) -> Vec<usize> {
        vec![0; env.n_pairs()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IqlConfig {
    pub learning_rate: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub energy_buckets: usize,
}

impl Default for IqlConfig {
    fn default() -> Self {
        Self { learning_rate: 0.1, gamma: 0.9, epsilon: 0.1, energy_buckets: 5 }
    }
}

/// Independent tabular Q-learning on a coarse local state (energy bucket, last
/// slot delivered, last action), one table per agent, trained online on the
/// team reward while it acts.
#[derive(Debug, Clone)]
pub struct IndependentQ {
    config: IqlConfig,
    n_actions: usize,
    tables: Vec<Vec<f64>>,
    rng: SimRng,
    prev: Vec<Option<(usize, usize)>>,
    learning: bool,
}

impl IndependentQ {
    pub fn new(config: IqlConfig, n_agents: usize, n_actions: usize, seed: u64) -> Self {
        let states = config.energy_buckets * 2 * n_actions;
        Self {
            config,
            n_actions,
            tables: vec![vec![0.0; states * n_actions]; n_agents],
            rng: rng_from_seed(seed, 5),
            prev: vec![None; n_agents],
            learning: true,
        }
    }

    /// Freezes the tables and acts greedily.
    pub fn freeze(&mut self) {
        self.learning = false;
    }

    fn state(&self, obs: &Observation) -> usize {
        let o = &obs.0;
        let b = self.config.energy_buckets;
        let energy = ((o[3] * b as f64) as usize).min(b - 1);
        let delivered = usize::from(o[4] > 0.0);
        let last = libm::round(o[6] * (self.n_actions - 1) as f64) as usize;
        (energy * 2 + delivered) * self.n_actions + last.min(self.n_actions - 1)
    }

    fn row(&self, agent: usize, s: usize) -> &[f64] {
        &self.tables[agent][s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// Runs `episodes` learning episodes on `env`.
    pub fn train(&mut self, env: &mut Env, episodes: usize, master_seed: u64) -> crate::Result<()> {
        for e in 0..episodes {
            crate::rollout::run_episode(env, self, derive_seed(master_seed, &[7, e as u64]), false)?;
        }
        Ok(())
    }
}

impl Controller for IndependentQ {
    fn name(&self) -> String {
        "iql".into()
    }

    fn reset(&mut self, _env: &Env) {
        self.prev.iter_mut().for_each(|p| *p = None);
    }

    fn act(&mut self, env: &Env, obs: &[Observation]) -> Vec<usize> {
        let eps = if self.learning { self.config.epsilon } else { 0.0 };
        let mut actions = Vec::with_capacity(obs.len());
        for (i, o) in obs.iter().enumerate() {
            let s = self.state(o);
            let a = if eps > 0.0 && self.rng.random::<f64>() < eps {
                self.rng.random_range(0..self.n_actions)
            } else {
                argmax(self.row(i, s))
            };
            self.prev[i] = Some((s, a));
            actions.push(if env.world().transmitters[i].halted { 0 } else { a });
        }
        actions
    }

    fn observe(&mut self, _env: &Env, outcome: &StepOutcome) {
        if !self.learning {
            return;
        }
        let (lr, gamma) = (self.config.learning_rate, self.config.gamma);
        for i in 0..self.tables.len() {
            let Some((s, _)) = self.prev[i] else { continue };
            let a = outcome.info.record.actions[i];
            let next = self.state(&outcome.next_observations[i]);
            let bootstrap = if outcome.done {
                0.0
            } else {
                self.row(i, next).iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            };
            let q = &mut self.tables[i][s * self.n_actions + a];
            *q += lr * (outcome.reward + gamma * bootstrap - *q);
        }
    }
}

/// Reference policies selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    Greedy,
    Random,
    NTdma,
    Silent,
    Iql,
}

impl Baseline {
    pub const ALL: [Baseline; 5] = [Self::Greedy, Self::Random, Self::NTdma, Self::Silent, Self::Iql];

    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "greedy" => Some(Self::Greedy),
            "random" => Some(Self::Random),
            "n-tdma" | "ntdma" | "tdma" => Some(Self::NTdma),
            "silent" => Some(Self::Silent),
            "iql" => Some(Self::Iql),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Greedy => "greedy",
            Self::Random => "random",
            Self::NTdma => "n-tdma",
            Self::Silent => "silent",
            Self::Iql => "iql",
        }
    }

    pub fn controller(self, n_agents: usize, n_actions: usize, seed: u64) -> Box<dyn Controller + Send> {
        match self {
            Self::Greedy => Box::new(Greedy),
            Self::Random => Box::new(RandomPower::new()),
            Self::NTdma => Box::new(NTdma),
            Self::Silent => Box::new(Silent),
            Self::Iql => Box::new(IndependentQ::new(IqlConfig::default(), n_agents, n_actions, seed)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvConfig;
    use crate::rollout::{evaluate, run_episode};

    #[test]
    fn ntdma_examples() {
        assert_eq!(ntdma_policy(1, 4, 3, 7), 6);
        assert_eq!(ntdma_policy(0, 4, 3, 7), 0);
        for slot in 1..50 {
            let active = (0..4).filter(|&i| ntdma_policy(i, slot, 4, 7) > 0).count();
            assert_eq!(active, 1);
        }
    }

    #[test]
    fn random_frequencies() {
        let mut rng = rng_from_seed(8, 0);
        let mut counts = [0u32; 7];
        for _ in 0..100_000 {
            counts[random_policy(&mut rng, 7)] += 1;
        }
        for c in counts {
            assert!((c as f64 / 1e5 - 1.0 / 7.0).abs() < 0.01);
        }
    }

    #[test]
    fn greedy_halts_before_lifetime() {
        let mut env = Env::new(EnvConfig::default()).unwrap();
        let run = run_episode(&mut env, &mut Greedy, 1, true).unwrap();
        assert_eq!(run.records.len(), 15);
        assert!(run.result.lifetime_violated);
        assert_eq!(run.result.lifetime_slots, 14);
        assert!(env.world().transmitters.iter().all(|n| n.halted && n.energy_j >= 500.0));
    }

    #[test]
    fn baselines_never_move_halted_nodes() {
        let cfg = EnvConfig::default();
        for b in Baseline::ALL {
            let mut env = Env::new(cfg.clone()).unwrap();
            let mut c = b.controller(3, 7, 0);
            let run = run_episode(&mut env, &mut c, 4, true).unwrap();
            for r in &run.records {
                assert_eq!(r.actions.len(), 3);
            }
            assert!(env.world().transmitters.iter().all(|n| n.energy_j >= 0.0));
        }
    }

    #[test]
    fn iql_learns_without_panicking() {
        let cfg = EnvConfig::default();
        let mut env = Env::new(cfg.clone()).unwrap();
        let mut q = IndependentQ::new(IqlConfig::default(), 3, 7, 1);
        q.train(&mut env, 50, 3).unwrap();
        q.freeze();
        let r = evaluate(&cfg, &mut q, &[1, 2]).unwrap();
        assert_eq!(r.len(), 2);
    }
}
