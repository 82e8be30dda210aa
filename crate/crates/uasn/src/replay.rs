//! Recomputes logged episodes from first principles and reports every field
//! whose logged value disagrees.
//!
//! From each slot's logged geometry, powers and fading draws the checker
//! re-derives the ambient noise, entity interference, SINR, delivery flags and
//! rates with the acoustic formulas. It then rebuilds the run ledger and the
//! team reward, including the early-termination penalty.

use std::fmt;

use serde::Serialize;
use uasn_core::acoustics;
use uasn_core::env::{team_reward, SlotRecord, TERMINATION_PENALTY};
use uasn_core::geometry::distance;
use uasn_core::metrics::{RunLedger, SlotLedger};
use uasn_core::world::MIN_LINK_DISTANCE_M;

use crate::trace::LoggedEpisode;

/// Relative tolerance for real-valued fields (JSON round-trip slack).
const REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mismatch {
    pub line: usize,
    pub slot: usize,
    pub field: String,
    pub logged: String,
    pub recomputed: String,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {} slot {}: {} logged {} recomputed {}", self.line, self.slot, self.field, self.logged, self.recomputed)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReplayReport {
    pub episodes: usize,
    pub slots: usize,
    pub mismatches: Vec<Mismatch>,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= REL_TOL * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

struct Checker<'a> {
    line: usize,
    slot: usize,
    out: &'a mut Vec<Mismatch>,
}

impl Checker<'_> {
    fn push(&mut self, field: String, logged: String, recomputed: String) {
        self.out.push(Mismatch { line: self.line, slot: self.slot, field, logged, recomputed });
    }

    fn real(&mut self, field: &str, logged: f64, recomputed: f64) {
        if !close(logged, recomputed) {
            self.push(field.into(), format!("{logged:e}"), format!("{recomputed:e}"));
        }
    }

    fn flag(&mut self, field: &str, logged: bool, recomputed: bool) {
        if logged != recomputed {
            self.push(field.into(), logged.to_string(), recomputed.to_string());
        }
    }
}

fn loss(a: [f64; 3], b: [f64; 3], channel: &acoustics::ChannelParams) -> uasn_core::Result<f64> {
    acoustics::transmission_loss(distance(a, b).max(MIN_LINK_DISTANCE_M) / 1000.0, channel)
}

/// Checks one episode, appending mismatches to `out`.
pub fn verify_episode(ep: &LoggedEpisode, out: &mut Vec<Mismatch>) -> uasn_core::Result<()> {
    let cfg = &ep.header.env;
    let channel = &ep.header.channel;
    let n = cfg.n_pairs();
    let noise = acoustics::ambient_noise_power(channel);
    let threshold = channel.sinr_threshold_linear();
    let mut ledger = RunLedger::new(n, cfg.world.tx_duration_s, cfg.alpha());

    for (k, (line, rec)) in ep.slots.iter().enumerate() {
        let mut c = Checker { line: *line, slot: rec.slot, out };
        if rec.slot != k + 1 {
            c.push("slot".into(), rec.slot.to_string(), (k + 1).to_string());
        }
        if !shape_ok(rec, n) {
            c.push("shape".into(), "inconsistent vector lengths".into(), format!("{n} pairs"));
            continue;
        }
        c.real("noise_w", rec.noise_w, noise);

        let mut sent = vec![false; n];
        let mut delivered = vec![false; n];
        let mut rates = vec![0.0; n];
        for r in 0..n {
            let interference = if rec.entity_active {
                let g = loss(rec.entity_position, rec.rx_positions[r], channel)? * rec.entity_fading[r] * rec.entity_fading[r];
                channel.transducer_eff * rec.entity_power_w * g
            } else {
                0.0
            };
            c.real(&format!("interference_w[{r}]"), rec.interference_w[r], interference);
            if rec.powers_w[r] <= 0.0 {
                c.real(&format!("sinr[{r}]"), rec.sinr[r], 0.0);
                continue;
            }
            sent[r] = true;
            let mut signal = 0.0;
            let mut cochannel = 0.0;
            for t in 0..n {
                let g = loss(rec.tx_positions[t], rec.rx_positions[r], channel)? * rec.fading[r][t] * rec.fading[r][t];
                if t == r {
                    signal = rec.powers_w[t] * g;
                } else {
                    cochannel += rec.powers_w[t] * g;
                }
            }
            let eta = channel.transducer_eff;
            let gamma = eta * signal / (eta * cochannel + interference + noise);
            c.real(&format!("sinr[{r}]"), rec.sinr[r], gamma);
            delivered[r] = gamma >= threshold;
            if delivered[r] {
                rates[r] = channel.bandwidth_hz * (1.0 + gamma).log2();
            }
        }
        for r in 0..n {
            c.flag(&format!("sent[{r}]"), rec.sent[r], sent[r]);
            c.flag(&format!("delivered[{r}]"), rec.delivered[r], delivered[r]);
            c.real(&format!("rates_bps[{r}]"), rec.rates_bps[r], rates[r]);
        }

        ledger.push(SlotLedger::new(sent, delivered, rates)?)?;
        let t = ledger.len();
        let violation = rec.halted_now.iter().any(|&i| i < n && !rec.malfunction[i])
            && t <= cfg.world.required_lifetime_slots as usize;
        let reward = if violation { TERMINATION_PENALTY } else { team_reward(cfg.reward, &ledger, t)? };
        let done = violation || t >= cfg.episode_len();
        c.flag("lifetime_violation", rec.lifetime_violation, violation);
        c.real("reward", rec.reward, reward);
        c.flag("done", rec.done, done);
    }
    Ok(())
}

fn shape_ok(rec: &SlotRecord, n: usize) -> bool {
    let lens = [
        rec.requested_actions.len(),
        rec.actions.len(),
        rec.powers_w.len(),
        rec.malfunction.len(),
        rec.tx_positions.len(),
        rec.rx_positions.len(),
        rec.fading.len(),
        rec.entity_fading.len(),
        rec.interference_w.len(),
        rec.sinr.len(),
        rec.sent.len(),
        rec.delivered.len(),
        rec.rates_bps.len(),
    ];
    lens.iter().all(|&l| l == n) && rec.fading.iter().all(|row| row.len() == n)
}

pub fn verify(episodes: &[LoggedEpisode]) -> uasn_core::Result<ReplayReport> {
    let mut report = ReplayReport { episodes: episodes.len(), ..Default::default() };
    for ep in episodes {
        report.slots += ep.slots.len();
        verify_episode(ep, &mut report.mismatches)?;
    }
    Ok(report)
}
