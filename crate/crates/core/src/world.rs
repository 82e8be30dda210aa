//! Physical world: deployment, drift, slot timing, energy books, malfunctions
//! and the mobile interfering entity.
//!
//! Transmitters sit evenly spaced on the rim of the top disk of a cylindrical
//! region, receivers directly below them on the bottom rim. Every node drifts
//! with a bounded random walk of its heading. A world instance is single-writer;
//! independent instances share nothing.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acoustics::{self, ChannelParams};
use crate::error::{Error, Result};
use crate::geometry::{self, Vec3};

/// Distances shorter than this are treated as this distance when evaluating the
/// transmission loss, which is singular at zero.
pub const MIN_LINK_DISTANCE_M: f64 = 1.0;

/// Behaviour of a transmitter that failed to load its policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GuardPolicy {
    /// Uniformly random power level every slot.
    #[default]
    Random,
    /// Never transmits.
    Silent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EntityConfig {
    pub enabled: bool,
    pub power_w: f64,
    pub speed_mps: f64,
    /// Per-slot probability that an inactive entity enters the region.
    pub activation_prob: f64,
    /// Slots spent loitering at the interior waypoint.
    pub dwell_slots: u32,
}

impl Default for EntityConfig {
    fn default() -> Self {
        Self { enabled: true, power_w: 2.0, speed_mps: 25.0, activation_prob: 0.1, dwell_slots: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub n_pairs: usize,
    pub region_radius_m: f64,
    pub region_height_m: f64,
    pub battery_j: f64,
    /// Fraction of the battery below which a node may not draw.
    pub halt_fraction: f64,
    pub required_lifetime_slots: u32,
    pub tx_duration_s: f64,
    /// Available transmit powers in watts; index 0 must be 0 W.
    pub power_levels_w: Vec<f64>,
    pub current_speed_mps: f64,
    /// Half-width of the uniform heading perturbation applied every slot.
    pub heading_jitter_rad: f64,
    /// Bound on the drift elevation angle.
    pub max_elevation_rad: f64,
    pub malfunction_rate: f64,
    pub guard_policy: GuardPolicy,
    pub entity: EntityConfig,
    pub sound_speed_mps: f64,
    pub delay_spread_s: f64,
    /// Recompute the slot duration every slot instead of only at deployment.
    pub recompute_slot_duration: bool,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            n_pairs: 3,
            region_radius_m: 1400.0,
            region_height_m: 1000.0,
            battery_j: 5000.0,
            halt_fraction: 0.10,
            required_lifetime_slots: 30,
            tx_duration_s: 5.0,
            power_levels_w: alloc::vec![0.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
            current_speed_mps: 0.1,
            heading_jitter_rad: 0.3,
            max_elevation_rad: 0.2,
            malfunction_rate: 0.0,
            guard_policy: GuardPolicy::Random,
            entity: EntityConfig::default(),
            sound_speed_mps: 1500.0,
            delay_spread_s: 0.1,
            recompute_slot_duration: false,
            seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pairs == 0 {
            return Err(Error::config("at least one transmitter-receiver pair is required"));
        }
        if self.power_levels_w.len() < 2 || self.power_levels_w[0] != 0.0 {
            return Err(Error::config("power levels must start at 0 W and offer a transmit level"));
        }
        if self.power_levels_w.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("power levels must be strictly increasing"));
        }
        if !(0.0..=1.0).contains(&self.malfunction_rate) {
            return Err(Error::config("malfunction rate must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.halt_fraction) {
            return Err(Error::config("halt fraction must lie in [0, 1)"));
        }
        let positive = [
            self.region_radius_m,
            self.region_height_m,
            self.battery_j,
            self.tx_duration_s,
            self.sound_speed_mps,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::config("region, battery, durations and sound speed must be positive"));
        }
        if self.current_speed_mps < 0.0 || self.delay_spread_s < 0.0 {
            return Err(Error::config("current speed and delay spread must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.entity.activation_prob) || self.entity.power_w < 0.0 {
            return Err(Error::config("entity activation probability or power out of range"));
        }
        Ok(())
    }

    pub fn n_actions(&self) -> usize {
        self.power_levels_w.len()
    }

    pub fn max_action(&self) -> usize {
        self.power_levels_w.len() - 1
    }

    /// Energy level below which no transmission may take a node.
    pub fn energy_floor_j(&self) -> f64 {
        self.halt_fraction * self.battery_j
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub id: usize,
    pub position: Vec3,
    pub is_transmitter: bool,
    pub partner_id: usize,
    pub energy_j: f64,
    pub malfunction: bool,
    pub halted: bool,
    pub sent_count: u32,
    pub delivered_count: u32,
    pub last_action_index: usize,
    pub last_delivered: bool,
    pub last_rate_bps: f64,
    /// Drift heading (azimuth, elevation) in radians.
    pub heading: (f64, f64),
}

/// Result of charging one slot's transmission to a node's battery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyOutcome {
    /// Nothing was drawn (0 W).
    Idle,
    /// The transmission was funded.
    Spent,
    /// Funding it would have pushed the battery below the floor: the node halts
    /// and does not transmit.
    Halted,
}

/// Charges `power_w · δ_tran` to a transmitter.
///
/// A transmission that would leave the node below the halt floor is refused and
/// the node becomes permanently halted, so the battery never drops below the floor.
pub fn consume_energy(node: &mut NodeState, power_w: f64, config: &WorldConfig) -> Result<EnergyOutcome> {
    if power_w == 0.0 {
        return Ok(EnergyOutcome::Idle);
    }
    if node.halted {
        return Err(Error::contract("halted node attempted to transmit"));
    }
    if !config.power_levels_w.contains(&power_w) {
        return Err(Error::contract("power is not one of the configured levels"));
    }
    let cost = power_w * config.tx_duration_s;
    if node.energy_j - cost < config.energy_floor_j() {
        node.halted = true;
        return Ok(EnergyOutcome::Halted);
    }
    node.energy_j -= cost;
    Ok(EnergyOutcome::Spent)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobileEntity {
    pub position: Vec3,
    /// Remaining waypoints; the last one is the exit point on the rim.
    pub waypoints: Vec<Vec3>,
    pub speed_mps: f64,
    pub active: bool,
    pub dwell_remaining: u32,
}

impl MobileEntity {
    pub fn inactive(speed_mps: f64) -> Self {
        Self { position: [0.0; 3], waypoints: Vec::new(), speed_mps, active: false, dwell_remaining: 0 }
    }
}

/// Advances the mobile entity by one slot of length `slot_s`.
///
/// An inactive entity enters with the configured probability at a random rim
/// point and heads for an interior waypoint and then an exit point roughly
/// opposite. Once the exit is reached it deactivates on the following slot.
pub fn advance_entity<R: Rng + ?Sized>(entity: &mut MobileEntity, config: &WorldConfig, slot_s: f64, rng: &mut R) {
    let ec = &config.entity;
    if !ec.enabled {
        entity.active = false;
        return;
    }
    let radius = config.region_radius_m;
    let height = config.region_height_m;
    if !entity.active {
        let u: f64 = rng.random();
        if u >= ec.activation_prob {
            return;
        }
        let entry_angle = rng.random_range(0.0..2.0 * PI);
        let entry_depth = rng.random_range(0.0..=height);
        let r_mid = 0.8 * radius * libm::sqrt(rng.random::<f64>());
        let mid_angle = rng.random_range(0.0..2.0 * PI);
        let mid_depth = rng.random_range(0.0..=height);
        let exit_angle = entry_angle + PI + rng.random_range(-PI / 3.0..PI / 3.0);
        let exit_depth = rng.random_range(0.0..=height);
        entity.position = [radius * libm::cos(entry_angle), radius * libm::sin(entry_angle), entry_depth];
        entity.waypoints = alloc::vec![
            [r_mid * libm::cos(mid_angle), r_mid * libm::sin(mid_angle), mid_depth],
            [radius * libm::cos(exit_angle), radius * libm::sin(exit_angle), exit_depth],
        ];
        entity.speed_mps = ec.speed_mps;
        entity.active = true;
        entity.dwell_remaining = 0;
        return;
    }
    if entity.waypoints.is_empty() {
        entity.active = false;
        return;
    }
    if entity.dwell_remaining > 0 {
        entity.dwell_remaining -= 1;
        return;
    }
    let mut budget = entity.speed_mps * slot_s;
    while budget > 0.0 {
        let Some(&target) = entity.waypoints.first() else { break };
        let to_target = geometry::sub(target, entity.position);
        let dist = geometry::norm(to_target);
        if dist <= budget {
            entity.position = target;
            entity.waypoints.remove(0);
            budget -= dist;
            if entity.waypoints.len() == 1 && ec.dwell_slots > 0 {
                entity.dwell_remaining = ec.dwell_slots;
                break;
            }
        } else {
            entity.position = geometry::add(entity.position, geometry::scale(to_target, budget / dist));
            budget = 0.0;
        }
    }
}

/// Interference power `η0·p_e·G(d)·ρ²` that the entity adds at a receiver.
pub fn entity_interference(
    entity: &MobileEntity,
    receiver: Vec3,
    power_w: f64,
    params: &ChannelParams,
    rho: f64,
) -> Result<f64> {
    if !entity.active {
        return Ok(0.0);
    }
    let loss = link_loss(entity.position, receiver, params)?;
    Ok(params.transducer_eff * power_w * acoustics::channel_gain(loss, rho))
}

/// Transmission loss between two points, with the distance floored at
/// [`MIN_LINK_DISTANCE_M`].
pub fn link_loss(a: Vec3, b: Vec3, params: &ChannelParams) -> Result<f64> {
    let d = geometry::distance(a, b).max(MIN_LINK_DISTANCE_M);
    acoustics::transmission_loss(d / 1000.0, params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub config: WorldConfig,
    pub transmitters: Vec<NodeState>,
    pub receivers: Vec<NodeState>,
    pub entity: MobileEntity,
    pub slot_duration_s: f64,
}

impl World {
    /// Places the nodes and draws the malfunction flags.
    pub fn deploy<R: Rng + ?Sized>(config: &WorldConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let n = config.n_pairs;
        let radius = config.region_radius_m;
        let mut transmitters = Vec::with_capacity(n);
        let mut receivers = Vec::with_capacity(n);
        for i in 0..n {
            let angle = 2.0 * PI * i as f64 / n as f64;
            let (x, y) = (radius * libm::cos(angle), radius * libm::sin(angle));
            let malfunction = rng.random::<f64>() < config.malfunction_rate;
            let tx_heading = (rng.random_range(0.0..2.0 * PI), 0.0);
            let rx_heading = (rng.random_range(0.0..2.0 * PI), 0.0);
            transmitters.push(NodeState {
                id: i,
                position: [x, y, 0.0],
                is_transmitter: true,
                partner_id: i,
                energy_j: config.battery_j,
                malfunction,
                halted: false,
                sent_count: 0,
                delivered_count: 0,
                last_action_index: 0,
                last_delivered: false,
                last_rate_bps: 0.0,
                heading: tx_heading,
            });
            receivers.push(NodeState {
                id: i,
                position: [x, y, config.region_height_m],
                is_transmitter: false,
                partner_id: i,
                energy_j: config.battery_j,
                malfunction: false,
                halted: false,
                sent_count: 0,
                delivered_count: 0,
                last_action_index: 0,
                last_delivered: false,
                last_rate_bps: 0.0,
                heading: rx_heading,
            });
        }
        let mut world = Self {
            config: config.clone(),
            transmitters,
            receivers,
            entity: MobileEntity::inactive(config.entity.speed_mps),
            slot_duration_s: 0.0,
        };
        world.slot_duration_s = world.slot_duration();
        Ok(world)
    }

    pub fn n_pairs(&self) -> usize {
        self.transmitters.len()
    }

    /// `δ_tran + max_i (d_i/v + δ_ds)` over the transmitter-receiver pairs.
    pub fn slot_duration(&self) -> f64 {
        let c = &self.config;
        let guard = self
            .transmitters
            .iter()
            .zip(&self.receivers)
            .map(|(t, r)| geometry::distance(t.position, r.position) / c.sound_speed_mps + c.delay_spread_s)
            .fold(0.0, f64::max);
        c.tx_duration_s + guard
    }

    /// Drifts every node by `c·δ_dur` along its heading, perturbing the heading
    /// first, and clamps positions to the region.
    pub fn step_mobility<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let c = &self.config;
        let step = c.current_speed_mps * self.slot_duration_s;
        let jitter = c.heading_jitter_rad;
        for node in self.transmitters.iter_mut().chain(self.receivers.iter_mut()) {
            let d_az: f64 = rng.random_range(-1.0..1.0) * jitter;
            let d_el: f64 = rng.random_range(-1.0..1.0) * jitter;
            let az = node.heading.0 + d_az;
            let el = (node.heading.1 + d_el).clamp(-c.max_elevation_rad, c.max_elevation_rad);
            node.heading = (az, el);
            let dir = [libm::cos(el) * libm::cos(az), libm::cos(el) * libm::sin(az), libm::sin(el)];
            let moved = geometry::add(node.position, geometry::scale(dir, step));
            node.position = geometry::clamp_to_cylinder(moved, c.region_radius_m, c.region_height_m);
        }
        if c.recompute_slot_duration {
            self.slot_duration_s = self.slot_duration();
        }
    }

    pub fn advance_entity<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        advance_entity(&mut self.entity, &self.config, self.slot_duration_s, rng);
    }

    pub fn transmitter_positions(&self) -> Vec<Vec3> {
        self.transmitters.iter().map(|n| n.position).collect()
    }

    pub fn receiver_positions(&self) -> Vec<Vec3> {
        self.receivers.iter().map(|n| n.position).collect()
    }
}
