//! Malfunction-rate schedules for training environments and checkpoint
//! selection.
//!
//! Episodes are numbered from 1. Schedule updates and evaluations happen on
//! episodes where `episode % update_cycle == 0`; an update takes effect for
//! that episode, an evaluation runs after it.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CurriculumKind {
    /// Fixed rate, best evaluated checkpoint.
    Pls,
    /// Linearly stepped rate, final checkpoint.
    Sls,
    /// Rate adapted to evaluated utility, best evaluated checkpoint.
    Rls,
    /// Perfect training environment (fixed rate 0), best evaluated checkpoint.
    #[default]
    None,
}

impl CurriculumKind {
    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "pls" => Some(Self::Pls),
            "sls" => Some(Self::Sls),
            "rls" => Some(Self::Rls),
            "none" => Some(Self::None),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Pls => "pls",
            Self::Sls => "sls",
            Self::Rls => "rls",
            Self::None => "none",
        }
    }

    /// Whether the returned model is the best evaluated checkpoint rather than the last one.
    pub fn selects_best(self) -> bool {
        !matches!(self, Self::Sls)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurriculumConfig {
    pub kind: CurriculumKind,
    pub eps_fixed: f64,
    pub eps_upper: f64,
    pub update_cycle: u64,
    pub eval_runs: usize,
    pub utility_threshold: f64,
    pub learning_factor: f64,
    pub total_episodes: u64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            kind: CurriculumKind::None,
            eps_fixed: 0.1,
            eps_upper: 0.2,
            update_cycle: 200,
            eval_runs: 20,
            utility_threshold: 1.25,
            learning_factor: 0.01,
            total_episodes: 200_000,
        }
    }
}

impl CurriculumConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.eps_upper)
            && (0.0..=1.0).contains(&self.eps_fixed)
            && self.learning_factor > 0.0
            && self.learning_factor < 1.0
            && self.update_cycle > 0
            && self.total_episodes > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::config("curriculum needs 0 ≤ ε ≤ 1, Γ ∈ (0,1) and positive cycle and length"))
        }
    }

    pub fn is_update_episode(&self, episode: u64) -> bool {
        episode.is_multiple_of(self.update_cycle)
    }
}

/// `ε^u · n_uc / M`.
pub fn sls_step(eps_upper: f64, update_cycle: u64, total_episodes: u64) -> f64 {
    eps_upper * update_cycle as f64 / total_episodes as f64
}

/// Rate in effect during `episode` (1-indexed).
pub fn sls_schedule(episode: u64, cfg: &CurriculumConfig) -> f64 {
    let steps = episode / cfg.update_cycle;
    (sls_step(cfg.eps_upper, cfg.update_cycle, cfg.total_episodes) * steps as f64).min(cfg.eps_upper)
}

/// Success raises ε toward 1 by Γ (capped at ε^u); failure shrinks it by Γ.
pub fn rls_update(eps: f64, mean_utility: f64, cfg: &CurriculumConfig) -> f64 {
    let g = cfg.learning_factor;
    if mean_utility >= cfg.utility_threshold {
        (eps + g * (1.0 - eps)).min(cfg.eps_upper)
    } else {
        let next = eps + g * (0.0 - eps);
        debug_assert!(next >= 0.0);
        next.max(0.0)
    }
}

/// One evaluation epoch of the curriculum trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurriculumPoint {
    pub episode: u64,
    pub epsilon: f64,
    pub mean_reward: f64,
    pub mean_utility: f64,
}

/// Schedule state owned by the trainer.
#[derive(Debug, Clone)]
pub struct Curriculum {
    config: CurriculumConfig,
    eps: f64,
    last_utility: f64,
    best: Option<(usize, f64)>,
    trace: Vec<CurriculumPoint>,
}

impl Curriculum {
    pub fn new(config: CurriculumConfig) -> Result<Self> {
        config.validate()?;
        let eps = match config.kind {
            CurriculumKind::Pls => config.eps_fixed,
            _ => 0.0,
        };
        Ok(Self { config, eps, last_utility: 0.0, best: None, trace: Vec::new() })
    }

    pub fn config(&self) -> &CurriculumConfig {
        &self.config
    }

    /// Malfunction rate for training `episode`, applying any due schedule update.
    pub fn begin_episode(&mut self, episode: u64) -> f64 {
        match self.config.kind {
            CurriculumKind::Pls => self.eps = self.config.eps_fixed,
            CurriculumKind::None => self.eps = 0.0,
            CurriculumKind::Sls => self.eps = sls_schedule(episode, &self.config),
            CurriculumKind::Rls => {
                if self.config.is_update_episode(episode) {
                    self.eps = rls_update(self.eps, self.last_utility, &self.config);
                }
            }
        }
        self.eps
    }

    pub fn epsilon(&self) -> f64 {
        self.eps
    }

    /// Records an evaluation after `episode`; returns whether it is the new best.
    pub fn record_evaluation(&mut self, episode: u64, mean_reward: f64, mean_utility: f64) -> bool {
        self.last_utility = mean_utility;
        let idx = self.trace.len();
        self.trace.push(CurriculumPoint { episode, epsilon: self.eps, mean_reward, mean_utility });
        let better = self.best.is_none_or(|(_, r)| mean_reward > r);
        if better {
            self.best = Some((idx, mean_reward));
        }
        better
    }

    /// The best recorded evaluation so far.
    pub fn best(&self) -> Option<&CurriculumPoint> {
        self.best.map(|(i, _)| &self.trace[i])
    }

    pub fn trace(&self) -> &[CurriculumPoint] {
        &self.trace
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: CurriculumKind) -> CurriculumConfig {
        CurriculumConfig { kind, ..Default::default() }
    }

    #[test]
    fn sls_examples() {
        let c = cfg(CurriculumKind::Sls);
        assert!((sls_step(0.2, 200, 200_000) - 0.0002).abs() < 1e-15);
        assert_eq!(sls_schedule(199, &c), 0.0);
        assert!((sls_schedule(200, &c) - 0.0002).abs() < 1e-15);
        assert!((sls_schedule(200_000, &c) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn rls_examples() {
        let c = cfg(CurriculumKind::Rls);
        assert!((rls_update(0.1, 2.0, &c) - 0.109).abs() < 1e-12);
        assert!((rls_update(0.005, 0.0, &c) - 0.00495).abs() < 1e-15);
        assert_eq!(rls_update(0.2, 2.0, &c), 0.2);
    }

    #[test]
    fn pls_constant_and_argmax() {
        let mut c = Curriculum::new(cfg(CurriculumKind::Pls)).unwrap();
        for e in 1..1000 {
            assert_eq!(c.begin_episode(e), 0.1);
        }
        assert!(c.record_evaluation(200, 1.1, 0.0));
        assert!(c.record_evaluation(400, 1.4, 0.0));
        assert!(!c.record_evaluation(600, 1.2, 0.0));
        assert_eq!(c.best().unwrap().episode, 400);
    }

    #[test]
    fn rls_initial_failure_keeps_zero() {
        let mut c = Curriculum::new(cfg(CurriculumKind::Rls)).unwrap();
        assert_eq!(c.begin_episode(200), 0.0);
        c.record_evaluation(200, 0.0, 2.0);
        assert_eq!(c.begin_episode(201), 0.0);
        assert!((c.begin_episode(400) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_factor() {
        assert!(Curriculum::new(CurriculumConfig { learning_factor: 1.0, ..Default::default() }).is_err());
    }
}
