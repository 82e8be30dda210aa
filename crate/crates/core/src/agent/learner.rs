//! Additive value decomposition over a parameter-shared recurrent Q-network.
//!
//! Each agent evaluates the same θ with its own hidden state. The team value
//! is `Q_tot = Σ_i Q_i(o_i, a_i)` over active (non-malfunctioning) agents, the
//! target is `y = r + γ·Σ_i max_a Q_i(o'_i, a; θ⁻)` (just `r` on terminal
//! steps), and the loss is `Σ_batch (y − Q_tot)²`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{argmax, NetShape};
use super::optim::{clip_grad_norm, Adam};
use super::replay::{EpisodeObs, ReplayBuffer, Transition};
use crate::env::Observation;
use crate::error::{Error, Result};
use crate::seeding::{rng_from_seed, SimRng};

/// How hidden states are supplied to sampled transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum HiddenMode {
    /// Use the hidden states recorded while acting.
    #[default]
    Stored,
    /// Re-run the current network over the episode prefix.
    Recompute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub hidden_size: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Target network copy period C, in episodes.
    pub target_sync_episodes: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_anneal_episodes: u64,
    pub updates_per_episode: usize,
    pub grad_clip_norm: Option<f64>,
    pub hidden_mode: HiddenMode,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            hidden_size: 64,
            learning_rate: 0.0005,
            gamma: 0.99,
            batch_size: 32,
            replay_capacity: 10_000,
            target_sync_episodes: 200,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_anneal_episodes: 100_000,
            updates_per_episode: 1,
            grad_clip_norm: Some(10.0),
            hidden_mode: HiddenMode::Stored,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.hidden_size > 0
            && self.learning_rate > 0.0
            && (0.0..=1.0).contains(&self.gamma)
            && self.batch_size > 0
            && self.replay_capacity > 0
            && self.target_sync_episodes > 0
            && (0.0..=1.0).contains(&self.epsilon_start)
            && (0.0..=1.0).contains(&self.epsilon_end)
            && self.grad_clip_norm.is_none_or(|c| c > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::config("invalid learner configuration"))
        }
    }
}

/// Linear decay from `start` to `end` over `anneal` episodes, then constant.
pub fn epsilon_schedule(episode: u64, start: f64, end: f64, anneal: u64) -> f64 {
    if anneal == 0 || episode >= anneal {
        return end;
    }
    start + (end - start) * episode as f64 / anneal as f64
}

/// Uniform random action with probability `epsilon`, else the greedy one.
pub fn epsilon_greedy<R: Rng + ?Sized>(q: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..q.len())
    } else {
        argmax(q)
    }
}

pub fn vdn_mix(chosen_q: &[f64]) -> f64 {
    chosen_q.iter().sum()
}

/// TD loss over `batch`, accumulating its gradient into `grad`.
pub fn td_loss_and_grad(
    shape: &NetShape,
    params: &[f64],
    target_params: &[f64],
    batch: &[&Transition],
    gamma: f64,
    grad: &mut [f64],
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::contract("td update needs a nonempty batch"));
    }
    let mut loss = 0.0;
    for tr in batch {
        let y = td_target(shape, target_params, tr, gamma);
        let mut caches = Vec::new();
        let mut q_tot = 0.0;
        for (i, obs) in tr.obs().iter().enumerate() {
            if !tr.active[i] {
                continue;
            }
            let c = shape.forward_cached(params, obs, &tr.hidden[i]);
            q_tot += c.q[tr.actions[i]];
            caches.push((i, c));
        }
        let diff = q_tot - y;
        loss += diff * diff;
        for (i, c) in &caches {
            let mut dq = vec![0.0; shape.actions];
            dq[tr.actions[*i]] = 2.0 * diff;
            shape.backward(params, c, &dq, grad);
        }
    }
    if !loss.is_finite() {
        return Err(Error::Numerical(alloc::format!("non-finite TD loss {loss}")));
    }
    Ok(loss)
}

/// TD loss without gradients.
pub fn td_loss(shape: &NetShape, params: &[f64], target_params: &[f64], batch: &[&Transition], gamma: f64) -> f64 {
    batch
        .iter()
        .map(|tr| {
            let q_tot: f64 = tr
                .obs()
                .iter()
                .enumerate()
                .filter(|(i, _)| tr.active[*i])
                .map(|(i, o)| shape.forward(params, o, &tr.hidden[i]).0[tr.actions[i]])
                .sum();
            let d = q_tot - td_target(shape, target_params, tr, gamma);
            d * d
        })
        .sum()
}

pub fn td_target(shape: &NetShape, target_params: &[f64], tr: &Transition, gamma: f64) -> f64 {
    if tr.done {
        return tr.reward;
    }
    let next: f64 = tr
        .next_obs()
        .iter()
        .enumerate()
        .filter(|(i, _)| tr.active[*i])
        .map(|(i, o)| {
            let q = shape.forward(target_params, o, &tr.next_hidden[i]).0;
            q[argmax(&q)]
        })
        .sum();
    tr.reward + gamma * next
}

struct PendingStep {
    hidden: Vec<Vec<f64>>,
    next_hidden: Vec<Vec<f64>>,
    actions: Vec<usize>,
    active: Vec<bool>,
    reward: f64,
    done: bool,
}

/// The trainer: online and target parameters, optimizer, replay and the
/// per-agent hidden states used while acting.
pub struct VdnLearner {
    config: LearnerConfig,
    shape: NetShape,
    n_agents: usize,
    params: Vec<f64>,
    target: Vec<f64>,
    adam: Adam,
    replay: ReplayBuffer<Transition>,
    rng: SimRng,
    hidden: Vec<Vec<f64>>,
    pre_hidden: Vec<Vec<f64>>,
    episode_obs: EpisodeObs,
    pending: Vec<PendingStep>,
    episodes: u64,
}

impl VdnLearner {
    pub fn new(config: LearnerConfig, n_agents: usize, obs_dim: usize, n_actions: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let shape = NetShape::new(obs_dim, config.hidden_size, n_actions);
        let mut rng = rng_from_seed(seed, 2);
        let params = shape.init_params(&mut rng);
        Ok(Self {
            target: params.clone(),
            adam: Adam::new(params.len(), config.learning_rate),
            replay: ReplayBuffer::new(config.replay_capacity),
            hidden: vec![shape.zero_hidden(); n_agents],
            pre_hidden: vec![shape.zero_hidden(); n_agents],
            episode_obs: Vec::new(),
            pending: Vec::new(),
            episodes: 0,
            params,
            rng,
            shape,
            n_agents,
            config,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn shape(&self) -> NetShape {
        self.shape
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn target_params(&self) -> &[f64] {
        &self.target
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.shape.n_params() {
            return Err(Error::contract("parameter vector has the wrong length"));
        }
        self.params = params;
        Ok(())
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    /// Exploration rate for the current episode.
    pub fn epsilon(&self) -> f64 {
        let c = &self.config;
        epsilon_schedule(self.episodes, c.epsilon_start, c.epsilon_end, c.epsilon_anneal_episodes)
    }

    pub fn begin_episode(&mut self, obs: &[Observation]) {
        self.hidden = vec![self.shape.zero_hidden(); self.n_agents];
        self.episode_obs = vec![obs.iter().map(|o| o.0.clone()).collect()];
        self.pending.clear();
    }

    /// ε-greedy joint action; advances every agent's hidden state.
    pub fn act(&mut self, obs: &[Observation], epsilon: f64) -> Vec<usize> {
        self.pre_hidden.clone_from(&self.hidden);
        let mut actions = Vec::with_capacity(self.n_agents);
        for (i, o) in obs.iter().enumerate() {
            let (q, h) = self.shape.forward(&self.params, &o.0, &self.hidden[i]);
            self.hidden[i] = h;
            actions.push(epsilon_greedy(&q, epsilon, &mut self.rng));
        }
        actions
    }

    /// Records the outcome of the last `act` call.
    pub fn record(&mut self, executed: &[usize], active: &[bool], reward: f64, next_obs: &[Observation], done: bool) {
        self.episode_obs.push(next_obs.iter().map(|o| o.0.clone()).collect());
        self.pending.push(PendingStep {
            hidden: self.pre_hidden.clone(),
            next_hidden: self.hidden.clone(),
            actions: executed.to_vec(),
            active: active.to_vec(),
            reward,
            done,
        });
    }

    /// Stores the episode, runs the configured updates and syncs the target
    /// every C episodes. Returns the mean loss of the updates, if any ran.
    pub fn end_episode(&mut self) -> Result<Option<f64>> {
        let episode = Arc::new(core::mem::take(&mut self.episode_obs));
        for (t, s) in self.pending.drain(..).enumerate() {
            self.replay.push(Transition {
                episode: Arc::clone(&episode),
                t,
                hidden: s.hidden,
                next_hidden: s.next_hidden,
                actions: s.actions,
                active: s.active,
                reward: s.reward,
                done: s.done,
            });
        }
        let mut losses = Vec::new();
        if self.replay.len() >= self.config.batch_size {
            for _ in 0..self.config.updates_per_episode {
                losses.push(self.update()?);
            }
        }
        self.episodes += 1;
        if self.episodes.is_multiple_of(self.config.target_sync_episodes) {
            self.sync_target();
        }
        Ok((!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64))
    }

    pub fn sync_target(&mut self) {
        self.target.clone_from(&self.params);
    }

    /// One optimizer step on a freshly sampled batch.
    pub fn update(&mut self) -> Result<f64> {
        let sampled: Vec<Transition> = self
            .replay
            .sample(self.config.batch_size, &mut self.rng)
            .into_iter()
            .cloned()
            .collect();
        let batch: Vec<Transition> = match self.config.hidden_mode {
            HiddenMode::Stored => sampled,
            HiddenMode::Recompute => sampled.into_iter().map(|t| self.recompute_hidden(t)).collect(),
        };
        let refs: Vec<&Transition> = batch.iter().collect();
        self.td_update(&refs)
    }

    /// One optimizer step on the given batch.
    pub fn td_update(&mut self, batch: &[&Transition]) -> Result<f64> {
        let mut grad = vec![0.0; self.params.len()];
        let loss = td_loss_and_grad(&self.shape, &self.params, &self.target, batch, self.config.gamma, &mut grad)?;
        if let Some(max) = self.config.grad_clip_norm {
            clip_grad_norm(&mut grad, max);
        }
        self.adam.step(&mut self.params, &grad);
        Ok(loss)
    }

    fn recompute_hidden(&self, mut tr: Transition) -> Transition {
        let mut h = vec![self.shape.zero_hidden(); self.n_agents];
        for step in &tr.episode[..tr.t] {
            for (i, o) in step.iter().enumerate() {
                h[i] = self.shape.forward(&self.params, o, &h[i]).1;
            }
        }
        let next: Vec<Vec<f64>> =
            tr.episode[tr.t].iter().enumerate().map(|(i, o)| self.shape.forward(&self.params, o, &h[i]).1).collect();
        tr.hidden = h;
        tr.next_hidden = next;
        tr
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn transition(shape: &NetShape, rng: &mut SimRng, n: usize, done: bool) -> Transition {
        let obs = |rng: &mut SimRng| -> Vec<Vec<f64>> {
            (0..n).map(|_| (0..shape.input).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
        };
        let hid = |rng: &mut SimRng| -> Vec<Vec<f64>> {
            (0..n).map(|_| (0..shape.hidden).map(|_| rng.random_range(-0.5..0.5)).collect()).collect()
        };
        let episode = Arc::new(vec![obs(rng), obs(rng)]);
        Transition {
            episode,
            t: 0,
            hidden: hid(rng),
            next_hidden: hid(rng),
            actions: (0..n).map(|_| rng.random_range(0..shape.actions)).collect(),
            active: vec![true; n],
            reward: rng.random_range(-1.0..3.0),
            done,
        }
    }

    #[test]
    fn epsilon_schedule_examples() {
        assert_eq!(epsilon_schedule(0, 1.0, 0.05, 100_000), 1.0);
        assert_eq!(epsilon_schedule(100_000, 1.0, 0.05, 100_000), 0.05);
        assert_eq!(epsilon_schedule(250_000, 1.0, 0.05, 100_000), 0.05);
        assert!((epsilon_schedule(50_000, 1.0, 0.05, 100_000) - 0.525).abs() < 1e-12);
    }

    #[test]
    fn greedy_examples() {
        let mut rng = rng_from_seed(0, 0);
        assert_eq!(epsilon_greedy(&[0.0, 5.0, 1.0, 0.0, 0.0, 0.0, 0.0], 0.0, &mut rng), 1);
        assert_eq!(epsilon_greedy(&[5.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.0, &mut rng), 0);
    }

    #[test]
    fn uniform_exploration_chi_square() {
        let mut rng = rng_from_seed(11, 0);
        let mut counts = [0u32; 7];
        let n = 100_000;
        for _ in 0..n {
            counts[epsilon_greedy(&[0.0; 7], 1.0, &mut rng)] += 1;
        }
        let e = n as f64 / 7.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 99.9% quantile of χ² with 6 degrees of freedom.
        assert!(chi2 < 22.46, "chi2 {chi2}");
    }

    #[test]
    fn vdn_examples() {
        assert_eq!(vdn_mix(&[1.0, 2.0, 3.0]), 6.0);
        assert_eq!(vdn_mix(&[0.0; 4]), 0.0);
    }

    #[test]
    fn terminal_target_is_reward() {
        let shape = NetShape::new(4, 4, 7);
        let mut rng = rng_from_seed(2, 0);
        let p = shape.init_params(&mut rng);
        let mut tr = transition(&shape, &mut rng, 3, true);
        tr.reward = -100.0;
        assert_eq!(td_target(&shape, &p, &tr, 0.99), -100.0);
    }

    #[test]
    fn zero_error_batch_leaves_params() {
        let shape = NetShape::new(4, 4, 7);
        let mut rng = rng_from_seed(3, 0);
        let p = shape.init_params(&mut rng);
        let mut tr = transition(&shape, &mut rng, 2, true);
        tr.reward = td_loss_q_tot(&shape, &p, &tr);
        let mut grad = vec![0.0; p.len()];
        let loss = td_loss_and_grad(&shape, &p, &p, &[&tr], 0.99, &mut grad).unwrap();
        assert!(loss < 1e-24);
        assert!(grad.iter().all(|g| g.abs() < 1e-10));
    }

    fn td_loss_q_tot(shape: &NetShape, p: &[f64], tr: &Transition) -> f64 {
        tr.obs().iter().enumerate().map(|(i, o)| shape.forward(p, o, &tr.hidden[i]).0[tr.actions[i]]).sum()
    }

    #[test]
    fn small_step_does_not_increase_batch_loss() {
        let shape = NetShape::new(6, 8, 7);
        let mut learner = VdnLearner::new(
            LearnerConfig { hidden_size: 8, learning_rate: 1e-6, grad_clip_norm: None, ..Default::default() },
            3,
            6,
            7,
            5,
        )
        .unwrap();
        let mut rng = rng_from_seed(4, 0);
        let batch: Vec<Transition> = (0..8).map(|k| transition(&shape, &mut rng, 3, k % 3 == 0)).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let before = td_loss(&shape, learner.params(), learner.target_params(), &refs, 0.99);
        let reported = learner.td_update(&refs).unwrap();
        let after = td_loss(&shape, learner.params(), learner.target_params(), &refs, 0.99);
        assert!((reported - before).abs() < 1e-9 * before.max(1.0));
        assert!(after <= before, "{after} > {before}");
    }

    #[test]
    fn target_sync_period() {
        let cfg = LearnerConfig { hidden_size: 4, batch_size: 2, target_sync_episodes: 3, ..Default::default() };
        let mut l = VdnLearner::new(cfg, 2, 3, 7, 0).unwrap();
        let obs = vec![Observation(vec![0.1, 0.2, 0.3]); 2];
        for ep in 1..=6u64 {
            l.begin_episode(&obs);
            for t in 0..3 {
                let a = l.act(&obs, 0.5);
                l.record(&a, &[true, true], 1.0, &obs, t == 2);
            }
            l.end_episode().unwrap();
            assert_eq!(l.params() == l.target_params(), ep % 3 == 0, "episode {ep}");
        }
    }

    #[test]
    fn recompute_matches_stored_for_fresh_params() {
        let cfg = LearnerConfig { hidden_size: 5, batch_size: 4, ..Default::default() };
        let mut l = VdnLearner::new(cfg, 2, 3, 7, 9).unwrap();
        let mut rng = rng_from_seed(10, 0);
        let seq: Vec<Vec<Observation>> = (0..5)
            .map(|_| (0..2).map(|_| Observation((0..3).map(|_| rng.random_range(0.0..1.0)).collect())).collect())
            .collect();
        l.begin_episode(&seq[0]);
        for t in 0..4 {
            let a = l.act(&seq[t], 0.0);
            l.record(&a, &[true, true], 0.0, &seq[t + 1], t == 3);
        }
        // Push without updating so the parameters are those used while acting.
        let episode = Arc::new(core::mem::take(&mut l.episode_obs));
        let steps: Vec<PendingStep> = l.pending.drain(..).collect();
        for (t, s) in steps.into_iter().enumerate() {
            let stored = Transition {
                episode: Arc::clone(&episode),
                t,
                hidden: s.hidden,
                next_hidden: s.next_hidden,
                actions: s.actions,
                active: s.active,
                reward: s.reward,
                done: s.done,
            };
            let again = l.recompute_hidden(stored.clone());
            assert_eq!(again.hidden, stored.hidden);
            assert_eq!(again.next_hidden, stored.next_hidden);
        }
    }
}
