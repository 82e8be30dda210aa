//! Performance measures over a run's slot ledger.
//!
//! Slots are 1-indexed in every `at_slot` argument: `at_slot = t` covers the
//! first `t` recorded slots. Sliding windows are recomputed from the raw
//! ledger on every call.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-slot send/deliver indicators and achieved rates of every pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotLedger {
    pub sent: Vec<bool>,
    pub delivered: Vec<bool>,
    pub rates_bps: Vec<f64>,
}

impl SlotLedger {
    pub fn new(sent: Vec<bool>, delivered: Vec<bool>, rates_bps: Vec<f64>) -> Result<Self> {
        let slot = Self { sent, delivered, rates_bps };
        slot.validate()?;
        Ok(slot)
    }

    pub fn silent(n: usize) -> Self {
        Self { sent: alloc::vec![false; n], delivered: alloc::vec![false; n], rates_bps: alloc::vec![0.0; n] }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sent.len();
        if self.delivered.len() != n || self.rates_bps.len() != n {
            return Err(Error::domain("slot ledger vectors differ in length"));
        }
        for i in 0..n {
            if self.delivered[i] && !self.sent[i] {
                return Err(Error::domain("delivery recorded without a transmission"));
            }
            if self.delivered[i] && !(self.rates_bps[i] > 0.0) {
                return Err(Error::domain("delivery recorded with a zero rate"));
            }
            if !(self.rates_bps[i] >= 0.0) {
                return Err(Error::domain("rates must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.sent.len()
    }

    pub fn deliveries(&self) -> usize {
        self.delivered.iter().filter(|&&d| d).count()
    }

    pub fn sends(&self) -> usize {
        self.sent.iter().filter(|&&s| s).count()
    }

    /// Active-but-ineffective links in this slot.
    pub fn failures(&self) -> usize {
        self.sent.iter().zip(&self.delivered).filter(|(&s, &d)| s != d).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLedger {
    pub slots: Vec<SlotLedger>,
    pub n: usize,
    pub tx_duration_s: f64,
    /// Adaptive fairness horizon in slots.
    pub horizon_alpha: usize,
}

impl RunLedger {
    pub fn new(n: usize, tx_duration_s: f64, horizon_alpha: usize) -> Self {
        Self { slots: Vec::new(), n, tx_duration_s, horizon_alpha }
    }

    pub fn push(&mut self, slot: SlotLedger) -> Result<()> {
        if slot.n() != self.n {
            return Err(Error::domain("slot ledger size does not match the run"));
        }
        slot.validate()?;
        self.slots.push(slot);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    fn require_nonempty(&self) -> Result<()> {
        if self.slots.is_empty() {
            Err(Error::domain("ledger holds no slots"))
        } else {
            Ok(())
        }
    }

    /// Per-node delivery counts over slots `from..=to` (1-indexed, inclusive).
    pub fn window_deliveries(&self, from: usize, to: usize) -> Vec<f64> {
        let mut sums = alloc::vec![0.0; self.n];
        for slot in &self.slots[from - 1..to] {
            for (s, &d) in sums.iter_mut().zip(&slot.delivered) {
                if d {
                    *s += 1.0;
                }
            }
        }
        sums
    }
}

/// Fairness horizon: the whole history or the last `α` slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Horizon {
    Lifetime,
    Adaptive(usize),
}

/// Jain's index `(Σx)² / (m·Σx²)`; 0 when every entry is 0.
pub fn jain_index(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let sum: f64 = values.iter().sum();
    let sum_sq: f64 = values.iter().map(|x| x * x).sum();
    if sum_sq == 0.0 {
        return 0.0;
    }
    sum * sum / (values.len() as f64 * sum_sq)
}

/// Total data moved: `Σ_i Σ_t c_i(t)·δ_tran`, in bits.
pub fn network_capacity(ledger: &RunLedger) -> Result<f64> {
    ledger.require_nonempty()?;
    let bits = ledger
        .slots
        .iter()
        .map(|s| s.rates_bps.iter().sum::<f64>() * ledger.tx_duration_s)
        .sum();
    Ok(bits)
}

/// Mean fraction of pairs with an effective link per slot.
pub fn avg_reuse(ledger: &RunLedger) -> Result<f64> {
    ledger.require_nonempty()?;
    let deliveries: usize = ledger.slots.iter().map(SlotLedger::deliveries).sum();
    Ok(deliveries as f64 / (ledger.len() * ledger.n) as f64)
}

/// Jain fairness of per-node deliveries over the horizon ending at `at_slot`.
/// When fewer than `h` slots have elapsed the whole history is used.
pub fn jain_fairness(ledger: &RunLedger, horizon: Horizon, at_slot: usize) -> Result<f64> {
    if at_slot == 0 || at_slot > ledger.len() {
        return Err(Error::domain("at_slot must lie in 1..=len"));
    }
    let h = match horizon {
        Horizon::Lifetime => at_slot,
        Horizon::Adaptive(alpha) => {
            if alpha == 0 {
                return Err(Error::domain("adaptive horizon must be positive"));
            }
            alpha
        }
    };
    let from = if at_slot >= h { at_slot - h + 1 } else { 1 };
    Ok(jain_index(&ledger.window_deliveries(from, at_slot)))
}

/// Mean number of active-but-ineffective links per pair and slot.
pub fn waste(ledger: &RunLedger) -> Result<f64> {
    ledger.require_nonempty()?;
    let failures: usize = ledger.slots.iter().map(SlotLedger::failures).sum();
    Ok(failures as f64 / (ledger.len() * ledger.n) as f64)
}

/// Lifetime-horizon fairness plus average reuse, evaluated at `at_slot`.
pub fn network_utility(ledger: &RunLedger, at_slot: usize) -> Result<f64> {
    let fairness = jain_fairness(ledger, Horizon::Lifetime, at_slot)?;
    let prefix = RunLedger { slots: ledger.slots[..at_slot].to_vec(), ..ledger.clone() };
    Ok(fairness + avg_reuse(&prefix)?)
}

/// Total delivered over total sent; 1 when nothing was sent.
pub fn delivery_ratio(ledger: &RunLedger) -> f64 {
    let sent: usize = ledger.slots.iter().map(SlotLedger::sends).sum();
    let delivered: usize = ledger.slots.iter().map(SlotLedger::deliveries).sum();
    if sent == 0 {
        1.0
    } else {
        delivered as f64 / sent as f64
    }
}

/// `(1 − R)/R`; `None` when the reuse is zero (no delivery ever happened).
pub fn delivery_delay(avg_reuse: f64) -> Option<f64> {
    if avg_reuse > 0.0 && avg_reuse <= 1.0 {
        Some((1.0 - avg_reuse) / avg_reuse)
    } else {
        None
    }
}

/// `(x − x_ref)/(x_max − x_ref)`.
pub fn normalize(x: f64, x_baseline: f64, x_max: f64) -> Result<f64> {
    let denom = x_max - x_baseline;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::domain("normalisation range is degenerate"));
    }
    Ok((x - x_baseline) / denom)
}

/// Every per-episode measure in one bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub slots: usize,
    pub capacity_bits: f64,
    pub fairness: f64,
    pub reuse: f64,
    pub waste: f64,
    pub utility: f64,
    pub delivery_ratio: f64,
    /// Absent when no delivery happened.
    pub delivery_delay: Option<f64>,
    /// Slots served before the first intelligent node halted (the full episode
    /// when none did).
    pub lifetime_slots: usize,
    pub lifetime_violated: bool,
    pub total_reward: f64,
}

impl EpisodeResult {
    pub fn from_ledger(ledger: &RunLedger, lifetime_slots: usize, lifetime_violated: bool, total_reward: f64) -> Result<Self> {
        let t = ledger.len();
        let reuse = avg_reuse(ledger)?;
        Ok(Self {
            slots: t,
            capacity_bits: network_capacity(ledger)?,
            fairness: jain_fairness(ledger, Horizon::Lifetime, t)?,
            reuse,
            waste: waste(ledger)?,
            utility: network_utility(ledger, t)?,
            delivery_ratio: delivery_ratio(ledger),
            delivery_delay: delivery_delay(reuse),
            lifetime_slots,
            lifetime_violated,
            total_reward,
        })
    }

    /// Field-wise mean. The delay of the aggregate is derived from the mean reuse.
    pub fn mean(results: &[EpisodeResult]) -> Option<EpisodeResult> {
        if results.is_empty() {
            return None;
        }
        let k = results.len() as f64;
        let avg = |f: fn(&EpisodeResult) -> f64| results.iter().map(f).sum::<f64>() / k;
        let reuse = avg(|r| r.reuse);
        Some(EpisodeResult {
            slots: (avg(|r| r.slots as f64) + 0.5) as usize,
            capacity_bits: avg(|r| r.capacity_bits),
            fairness: avg(|r| r.fairness),
            reuse,
            waste: avg(|r| r.waste),
            utility: avg(|r| r.utility),
            delivery_ratio: avg(|r| r.delivery_ratio),
            delivery_delay: delivery_delay(reuse),
            lifetime_slots: (avg(|r| r.lifetime_slots as f64) + 0.5) as usize,
            lifetime_violated: results.iter().any(|r| r.lifetime_violated),
            total_reward: avg(|r| r.total_reward),
        })
    }
}
