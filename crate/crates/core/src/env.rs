//! Dec-POMDP wrapper around the world.
//!
//! Each slot the environment resolves the executed joint action (halted nodes
//! stay silent, malfunctioning nodes follow their guard policy, intelligent
//! nodes whose observation was lost act at random), charges the batteries,
//! evaluates every link's SINR with fresh fading, appends the slot to the run
//! ledger and pays a team reward.
//!
//! Two independent random streams are used: the world stream (deployment,
//! drift, fading, the mobile entity, wind) never depends on the actions taken,
//! so different policies run on the same seed see the same physical channel.
//! Guard-policy and lost-observation draws come from the behaviour stream.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::acoustics::{self, ChannelParams};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::metrics::{self, EpisodeResult, Horizon, RunLedger, SlotLedger};
use crate::seeding::{rng_from_seed, SimRng, BEHAVIOUR_STREAM, WORLD_STREAM};
use crate::world::{self, consume_energy, EnergyOutcome, GuardPolicy, World, WorldConfig};

/// Reward paid on the slot in which the lifetime requirement is broken. It
/// replaces that slot's regular reward.
pub const TERMINATION_PENALTY: f64 = -100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum RewardKind {
    /// `φ_L(t)·Σre`.
    #[serde(rename = "fr-lh")]
    FrLh,
    /// `φ_L(t)·Σre − ς`.
    #[serde(rename = "e-fr-lh")]
    EFrLh,
    /// `φ_A(t)·Σre − ς`.
    #[default]
    #[serde(rename = "e-fr-ah")]
    EFrAh,
}

impl RewardKind {
    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "fr-lh" => Some(Self::FrLh),
            "e-fr-lh" => Some(Self::EFrLh),
            "e-fr-ah" => Some(Self::EFrAh),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::FrLh => "fr-lh",
            Self::EFrLh => "e-fr-lh",
            Self::EFrAh => "e-fr-ah",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub world: WorldConfig,
    pub channel: ChannelParams,
    pub reward: RewardKind,
    /// Episode length in slots; defaults to the required lifetime.
    pub episode_slots: Option<u32>,
    /// Adaptive fairness horizon; defaults to the number of pairs.
    pub fairness_horizon: Option<usize>,
    /// Per-node, per-slot probability that an intelligent node's observation is lost.
    pub missing_observation_prob: f64,
    /// Standard deviation of the per-episode wind speed around `channel.wind_mps`.
    pub wind_std_mps: f64,
    /// SINR (dB) whose Shannon rate normalises the rate and interference observations.
    pub rate_norm_gamma_db: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            world: WorldConfig::default(),
            channel: ChannelParams::default(),
            reward: RewardKind::EFrAh,
            episode_slots: None,
            fairness_horizon: None,
            missing_observation_prob: 0.0,
            wind_std_mps: 0.1,
            rate_norm_gamma_db: 60.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.channel.validate()?;
        if !(0.0..=1.0).contains(&self.missing_observation_prob) {
            return Err(Error::config("missing-observation probability must lie in [0, 1]"));
        }
        if self.episode_slots == Some(0) || self.fairness_horizon == Some(0) {
            return Err(Error::config("episode length and fairness horizon must be positive"));
        }
        if !(self.wind_std_mps >= 0.0) || !(self.rate_norm_gamma_db > 0.0) {
            return Err(Error::config("wind spread must be non-negative and the rate cap positive"));
        }
        Ok(())
    }

    pub fn n_pairs(&self) -> usize {
        self.world.n_pairs
    }

    pub fn n_actions(&self) -> usize {
        self.world.n_actions()
    }

    pub fn episode_len(&self) -> usize {
        self.episode_slots.unwrap_or(self.world.required_lifetime_slots) as usize
    }

    pub fn alpha(&self) -> usize {
        self.fairness_horizon.unwrap_or(self.world.n_pairs)
    }

    pub fn observation_dim(&self) -> usize {
        Observation::dim(self.world.n_pairs)
    }
}

/// One agent's flattened local view.
///
/// Layout for `N` pairs (dimension `14 + N + 3(N−1)`):
///
/// | offset | width | content |
/// |---|---|---|
/// | 0 | 3 | own position (`x/R`, `y/R`, `z/H`) |
/// | 3 | 1 | residual energy fraction |
/// | 4 | 1 | last achieved rate over the rate cap (0 when the last slot did not deliver) |
/// | 5 | 1 | delivered / max(1, sent) |
/// | 6 | 1 | last executed action index over `|P| − 1` |
/// | 7 | N | one-hot agent id |
/// | 7+N | 3(N−1) | other transmitters' positions, ascending id |
/// | 4+4N | 3 | mobile-entity position (zeros when absent) |
/// | 7+4N | 1 | entity interference at own receiver, log-scaled into `[0, 1]` |
/// | 8+4N | 3 | intended receiver position |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub const fn dim(n: usize) -> usize {
        14 + n + 3 * (n - 1)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Everything needed to recompute one slot from first principles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    /// 1-indexed slot number.
    pub slot: usize,
    pub requested_actions: Vec<usize>,
    pub actions: Vec<usize>,
    pub powers_w: Vec<f64>,
    pub halted_now: Vec<usize>,
    pub malfunction: Vec<bool>,
    pub tx_positions: Vec<Vec3>,
    pub rx_positions: Vec<Vec3>,
    pub entity_active: bool,
    pub entity_position: Vec3,
    pub entity_power_w: f64,
    /// `fading[r][t]`: coefficient from transmitter `t` to receiver `r`.
    pub fading: Vec<Vec<f64>>,
    pub entity_fading: Vec<f64>,
    pub noise_w: f64,
    pub interference_w: Vec<f64>,
    pub sinr: Vec<f64>,
    pub sent: Vec<bool>,
    pub delivered: Vec<bool>,
    pub rates_bps: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub lifetime_violation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_observations: Vec<Observation>,
    pub reward: f64,
    pub done: bool,
    pub ledger_slot: SlotLedger,
    pub info: StepInfo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    /// Transmitters whose requested power the battery could not fund this slot.
    pub halted_now: Vec<usize>,
    /// An intelligent node halted before the required lifetime.
    pub lifetime_violation: bool,
    pub record: SlotRecord,
}

/// Team reward for the latest slot of `ledger` (`at_slot` is 1-indexed).
pub fn team_reward(kind: RewardKind, ledger: &RunLedger, at_slot: usize) -> Result<f64> {
    if at_slot == 0 || at_slot > ledger.len() {
        return Err(Error::domain("at_slot must lie in 1..=len"));
    }
    let slot = &ledger.slots[at_slot - 1];
    let deliveries = slot.deliveries() as f64;
    let penalty = slot.failures() as f64 / ledger.n as f64;
    Ok(match kind {
        RewardKind::FrLh => metrics::jain_fairness(ledger, Horizon::Lifetime, at_slot)? * deliveries,
        RewardKind::EFrLh => metrics::jain_fairness(ledger, Horizon::Lifetime, at_slot)? * deliveries - penalty,
        RewardKind::EFrAh => {
            metrics::jain_fairness(ledger, Horizon::Adaptive(ledger.horizon_alpha), at_slot)? * deliveries - penalty
        }
    })
}

pub struct Env {
    config: EnvConfig,
    world: World,
    channel: ChannelParams,
    noise_w: f64,
    world_rng: SimRng,
    behaviour_rng: SimRng,
    ledger: RunLedger,
    missing: Vec<bool>,
    last_interference: Vec<f64>,
    observations: Vec<Observation>,
    done: bool,
    first_halt_slot: Option<usize>,
    lifetime_violated: bool,
    total_reward: f64,
    seed: u64,
}

impl Env {
    /// Builds an environment and resets it with `config.world.seed`.
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let seed = config.world.seed;
        let mut world_rng = rng_from_seed(seed, WORLD_STREAM);
        let world = World::deploy(&config.world, &mut world_rng)?;
        let n = config.n_pairs();
        let mut env = Self {
            channel: config.channel,
            noise_w: 0.0,
            world,
            world_rng,
            behaviour_rng: rng_from_seed(seed, BEHAVIOUR_STREAM),
            ledger: RunLedger::new(n, config.world.tx_duration_s, config.alpha()),
            missing: alloc::vec![false; n],
            last_interference: alloc::vec![0.0; n],
            observations: Vec::new(),
            done: false,
            first_halt_slot: None,
            lifetime_violated: false,
            total_reward: 0.0,
            seed,
            config,
        };
        env.reset(seed)?;
        Ok(env)
    }

    /// Starts a fresh episode: new deployment, zeroed histories.
    pub fn reset(&mut self, seed: u64) -> Result<Vec<Observation>> {
        let n = self.config.n_pairs();
        self.seed = seed;
        self.world_rng = rng_from_seed(seed, WORLD_STREAM);
        self.behaviour_rng = rng_from_seed(seed, BEHAVIOUR_STREAM);
        self.world = World::deploy(&self.config.world, &mut self.world_rng)?;
        self.channel = self.config.channel;
        if self.config.wind_std_mps > 0.0 {
            let wind = Normal::new(self.config.channel.wind_mps, self.config.wind_std_mps)
                .map_err(|_| Error::config("invalid wind distribution"))?;
            self.channel.wind_mps = wind.sample(&mut self.world_rng).max(0.0);
        }
        self.noise_w = acoustics::ambient_noise_power(&self.channel);
        self.world.advance_entity(&mut self.world_rng);
        self.ledger = RunLedger::new(n, self.config.world.tx_duration_s, self.config.alpha());
        self.last_interference = alloc::vec![0.0; n];
        self.done = false;
        self.first_halt_slot = None;
        self.lifetime_violated = false;
        self.total_reward = 0.0;
        self.draw_missing();
        self.observations = self.build_observations();
        Ok(self.observations.clone())
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    /// Channel parameters of the current episode (wind already drawn).
    pub fn channel(&self) -> &ChannelParams {
        &self.channel
    }

    pub fn noise_w(&self) -> f64 {
        self.noise_w
    }

    pub fn ledger(&self) -> &RunLedger {
        &self.ledger
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// Intelligent nodes whose current observation is unavailable.
    pub fn missing(&self) -> &[bool] {
        &self.missing
    }

    /// Number of completed slots.
    pub fn slot(&self) -> usize {
        self.ledger.len()
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn total_reward(&self) -> f64 {
        self.total_reward
    }

    pub fn n_pairs(&self) -> usize {
        self.config.n_pairs()
    }

    pub fn n_actions(&self) -> usize {
        self.config.n_actions()
    }

    /// Metric bundle of the episode so far.
    pub fn episode_result(&self) -> Result<EpisodeResult> {
        let lifetime = self.first_halt_slot.map(|t| t - 1).unwrap_or(self.ledger.len());
        EpisodeResult::from_ledger(&self.ledger, lifetime, self.lifetime_violated, self.total_reward)
    }

    fn draw_missing(&mut self) {
        let p = self.config.missing_observation_prob;
        for (i, m) in self.missing.iter_mut().enumerate() {
            *m = p > 0.0 && !self.world.transmitters[i].malfunction && self.behaviour_rng.random::<f64>() < p;
        }
    }

    fn resolve_actions(&mut self, requested: &[usize]) -> Vec<usize> {
        let n_actions = self.config.n_actions();
        let mut executed = Vec::with_capacity(requested.len());
        for (i, &req) in requested.iter().enumerate() {
            let node = &self.world.transmitters[i];
            let a = if node.halted {
                0
            } else if node.malfunction {
                match self.config.world.guard_policy {
                    GuardPolicy::Random => self.behaviour_rng.random_range(0..n_actions),
                    GuardPolicy::Silent => 0,
                }
            } else if self.missing[i] {
                self.behaviour_rng.random_range(0..n_actions)
            } else {
                req
            };
            executed.push(a);
        }
        executed
    }

    /// Applies one joint action.
    pub fn step(&mut self, joint_action: &[usize]) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::contract("step called on a finished episode"));
        }
        let n = self.n_pairs();
        if joint_action.len() != n {
            return Err(Error::contract("joint action must hold one index per transmitter"));
        }
        if let Some(&bad) = joint_action.iter().find(|&&a| a >= self.n_actions()) {
            return Err(Error::Contract(alloc::format!("action index {bad} out of range")));
        }
        let t = self.ledger.len() + 1;
        let mut actions = self.resolve_actions(joint_action);

        let mut halted_now = Vec::new();
        let mut powers = alloc::vec![0.0; n];
        for i in 0..n {
            let p = self.config.world.power_levels_w[actions[i]];
            match consume_energy(&mut self.world.transmitters[i], p, &self.config.world)? {
                EnergyOutcome::Spent => powers[i] = p,
                EnergyOutcome::Idle => {}
                EnergyOutcome::Halted => {
                    halted_now.push(i);
                    actions[i] = 0;
                }
            }
        }

        // Fading is drawn for every link every slot so the world stream does not
        // depend on which links are active.
        let mut fading = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..n).map(|_| acoustics::sample_fading(&mut self.world_rng)).collect();
            fading.push(row);
        }
        let entity_fading: Vec<f64> = (0..n).map(|_| acoustics::sample_fading(&mut self.world_rng)).collect();

        let tx_positions = self.world.transmitter_positions();
        let rx_positions = self.world.receiver_positions();
        let entity_power = self.config.world.entity.power_w;
        let threshold = self.channel.sinr_threshold_linear();

        let mut interference = alloc::vec![0.0; n];
        let mut sinr = alloc::vec![0.0; n];
        let mut sent = alloc::vec![false; n];
        let mut delivered = alloc::vec![false; n];
        let mut rates = alloc::vec![0.0; n];
        let mut gains = alloc::vec![0.0; n];
        for r in 0..n {
            interference[r] =
                world::entity_interference(&self.world.entity, rx_positions[r], entity_power, &self.channel, entity_fading[r])?;
            if powers[r] == 0.0 {
                continue;
            }
            for tx in 0..n {
                let loss = world::link_loss(tx_positions[tx], rx_positions[r], &self.channel)?;
                gains[tx] = acoustics::channel_gain(loss, fading[r][tx]);
            }
            sent[r] = true;
            sinr[r] = acoustics::sinr(&powers, &gains, r, interference[r], self.noise_w, self.channel.transducer_eff)?;
            if sinr[r] >= threshold {
                delivered[r] = true;
                rates[r] = acoustics::data_rate(sinr[r], &self.channel);
            }
        }
        // One receiver per transmitter: at most one effective arrival per receiver holds by construction.
        debug_assert!(delivered.iter().zip(&sent).all(|(&d, &s)| !d || s));

        for i in 0..n {
            let node = &mut self.world.transmitters[i];
            if sent[i] {
                node.sent_count += 1;
            }
            if delivered[i] {
                node.delivered_count += 1;
            }
            node.last_action_index = actions[i];
            node.last_delivered = delivered[i];
            node.last_rate_bps = rates[i];
        }

        let slot_ledger = SlotLedger::new(sent.clone(), delivered.clone(), rates.clone())?;
        self.ledger.push(slot_ledger.clone())?;

        let intelligent_halted = halted_now.iter().any(|&i| !self.world.transmitters[i].malfunction);
        if !halted_now.is_empty() && self.first_halt_slot.is_none() && intelligent_halted {
            self.first_halt_slot = Some(t);
        }
        let violation = intelligent_halted && t <= self.config.world.required_lifetime_slots as usize;
        let reward = if violation {
            self.lifetime_violated = true;
            TERMINATION_PENALTY
        } else {
            team_reward(self.config.reward, &self.ledger, t)?
        };
        self.total_reward += reward;
        self.done = violation || t >= self.config.episode_len();

        let record = SlotRecord {
            slot: t,
            requested_actions: joint_action.to_vec(),
            actions: actions.clone(),
            powers_w: powers,
            halted_now: halted_now.clone(),
            malfunction: self.world.transmitters.iter().map(|n| n.malfunction).collect(),
            tx_positions,
            rx_positions,
            entity_active: self.world.entity.active,
            entity_position: self.world.entity.position,
            entity_power_w: entity_power,
            fading,
            entity_fading,
            noise_w: self.noise_w,
            interference_w: interference.clone(),
            sinr,
            sent,
            delivered,
            rates_bps: rates,
            reward,
            done: self.done,
            lifetime_violation: violation,
        };

        self.last_interference = interference;
        self.world.step_mobility(&mut self.world_rng);
        self.world.advance_entity(&mut self.world_rng);
        self.draw_missing();
        self.observations = self.build_observations();

        Ok(StepOutcome {
            next_observations: self.observations.clone(),
            reward,
            done: self.done,
            ledger_slot: slot_ledger,
            info: StepInfo { halted_now, lifetime_violation: violation, record },
        })
    }

    fn build_observations(&self) -> Vec<Observation> {
        (0..self.n_pairs()).map(|i| self.observe(i)).collect()
    }

    fn observe(&self, i: usize) -> Observation {
        let n = self.n_pairs();
        let wc = &self.config.world;
        let (radius, height) = (wc.region_radius_m, wc.region_height_m);
        let norm = |p: Vec3| [p[0] / radius, p[1] / radius, p[2] / height];
        let node = &self.world.transmitters[i];
        let cap_gamma = acoustics::db_to_linear(self.config.rate_norm_gamma_db);
        let rate_cap = self.channel.bandwidth_hz * libm::log2(1.0 + cap_gamma);

        let mut v = Vec::with_capacity(Observation::dim(n));
        v.extend_from_slice(&norm(node.position));
        v.push(node.energy_j / wc.battery_j);
        v.push((node.last_rate_bps / rate_cap).min(1.0));
        v.push(node.delivered_count as f64 / node.sent_count.max(1) as f64);
        v.push(node.last_action_index as f64 / wc.max_action() as f64);
        v.extend((0..n).map(|j| if j == i { 1.0 } else { 0.0 }));
        for (j, other) in self.world.transmitters.iter().enumerate() {
            if j != i {
                v.extend_from_slice(&norm(other.position));
            }
        }
        if self.world.entity.active {
            v.extend_from_slice(&norm(self.world.entity.position));
        } else {
            v.extend_from_slice(&[0.0; 3]);
        }
        let decades = self.config.rate_norm_gamma_db / 10.0;
        v.push((libm::log10(1.0 + self.last_interference[i] / self.noise_w) / decades).min(1.0));
        v.extend_from_slice(&norm(self.world.receivers[node.partner_id].position));
        debug_assert_eq!(v.len(), Observation::dim(n));
        Observation(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn config(n: usize) -> EnvConfig {
        let mut c = EnvConfig::default();
        c.world.n_pairs = n;
        c
    }

    fn slot(sent: &[u8], delivered: &[u8]) -> SlotLedger {
        let rates = delivered.iter().map(|&d| if d == 1 { 1.0 } else { 0.0 }).collect();
        SlotLedger::new(sent.iter().map(|&s| s == 1).collect(), delivered.iter().map(|&d| d == 1).collect(), rates).unwrap()
    }

    #[test]
    fn reset_dimensions_and_determinism() {
        let mut env = Env::new(config(3)).unwrap();
        let a = env.reset(42).unwrap();
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|o| o.0.len() == 23 && o.0.iter().all(|x| x.is_finite())));
        let b = env.reset(42).unwrap();
        assert_eq!(a, b);
        assert!(env.world().transmitters.iter().all(|t| !t.malfunction));
    }

    #[test]
    fn silent_slot_rewards_zero() {
        for kind in [RewardKind::FrLh, RewardKind::EFrLh, RewardKind::EFrAh] {
            let mut c = config(3);
            c.reward = kind;
            let mut env = Env::new(c).unwrap();
            let out = env.step(&[0, 0, 0]).unwrap();
            assert_eq!(out.reward, 0.0);
            assert_eq!(out.ledger_slot, SlotLedger::silent(3));
        }
    }

    #[test]
    fn reward_examples() {
        let mut l = RunLedger::new(3, 5.0, 3);
        l.push(slot(&[1, 1, 1], &[1, 1, 1])).unwrap();
        assert_eq!(team_reward(RewardKind::FrLh, &l, 1).unwrap(), 3.0);
        assert_eq!(team_reward(RewardKind::EFrLh, &l, 1).unwrap(), 3.0);

        let mut l = RunLedger::new(2, 5.0, 2);
        l.push(slot(&[1, 1], &[1, 0])).unwrap();
        assert_eq!(team_reward(RewardKind::EFrLh, &l, 1).unwrap(), 0.0);

        let mut l = RunLedger::new(4, 5.0, 4);
        l.push(slot(&[1, 1, 1, 1], &[1, 1, 1, 1])).unwrap();
        assert_eq!(team_reward(RewardKind::EFrAh, &l, 1).unwrap(), 4.0);
    }

    #[test]
    fn out_of_range_action_is_rejected() {
        let mut env = Env::new(config(2)).unwrap();
        assert!(matches!(env.step(&[0, 7]), Err(Error::Contract(_))));
        assert!(env.step(&[0]).is_err());
    }

    #[test]
    fn greedy_halts_and_pays_penalty() {
        let mut env = Env::new(config(3)).unwrap();
        let mut last = None;
        for t in 1..=30 {
            let out = env.step(&[6, 6, 6]).unwrap();
            if out.done {
                last = Some((t, out));
                break;
            }
        }
        let (t, out) = last.unwrap();
        assert_eq!(t, 15);
        assert_eq!(out.reward, TERMINATION_PENALTY);
        assert!(out.info.lifetime_violation);
        assert_eq!(out.info.halted_now, vec![0, 1, 2]);
        let r = env.episode_result().unwrap();
        assert_eq!(r.lifetime_slots, 14);
        assert!(r.lifetime_violated);
        assert!(env.step(&[0, 0, 0]).is_err());
    }

    #[test]
    fn delivered_flags_match_recomputation() {
        let mut c = config(4);
        c.world.entity.activation_prob = 0.5;
        let mut env = Env::new(c).unwrap();
        let mut rng = rng_from_seed(99, 5);
        while !env.is_done() {
            let acts: Vec<usize> = (0..4).map(|_| rng.random_range(0..5)).collect();
            let out = env.step(&acts).unwrap();
            let rec = &out.info.record;
            for r in 0..4 {
                let gains: Vec<f64> = (0..4)
                    .map(|t| {
                        let d = crate::geometry::distance(rec.tx_positions[t], rec.rx_positions[r]);
                        acoustics::transmission_loss(d / 1000.0, env.channel()).unwrap() * rec.fading[r][t] * rec.fading[r][t]
                    })
                    .collect();
                let mut interf = 0.0;
                for t in 0..4 {
                    if t != r {
                        interf += rec.powers_w[t] * gains[t];
                    }
                }
                let gamma = 0.9 * rec.powers_w[r] * gains[r] / (0.9 * interf + rec.interference_w[r] + rec.noise_w);
                let expect = rec.powers_w[r] > 0.0 && gamma >= 10.0;
                assert_eq!(rec.delivered[r], expect);
            }
        }
    }

    #[test]
    fn reward_bounds_hold() {
        let mut c = config(4);
        c.world.battery_j = 1e9;
        c.episode_slots = Some(60);
        for kind in [RewardKind::FrLh, RewardKind::EFrLh, RewardKind::EFrAh] {
            c.reward = kind;
            let mut env = Env::new(c.clone()).unwrap();
            let mut rng = rng_from_seed(3, 9);
            while !env.is_done() {
                let acts: Vec<usize> = (0..4).map(|_| rng.random_range(0..7)).collect();
                let out = env.step(&acts).unwrap();
                let lo = if kind == RewardKind::FrLh { 0.0 } else { -1.0 };
                assert!(out.reward >= lo && out.reward <= 4.0, "{kind:?} {}", out.reward);
            }
        }
    }

    #[test]
    fn silent_guard_never_transmits() {
        let mut c = config(3);
        c.world.malfunction_rate = 1.0;
        c.world.guard_policy = GuardPolicy::Silent;
        let mut env = Env::new(c).unwrap();
        let out = env.step(&[6, 6, 6]).unwrap();
        assert_eq!(out.info.record.actions, vec![0, 0, 0]);
    }

    #[test]
    fn trajectories_reproducible() {
        let run = || {
            let mut env = Env::new(config(3)).unwrap();
            let mut rewards = Vec::new();
            while !env.is_done() {
                rewards.push(env.step(&[3, 3, 3]).unwrap().reward);
            }
            (rewards, env.world().clone())
        };
        assert_eq!(run(), run());
    }
}
