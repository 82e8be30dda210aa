//! Run configuration: one TOML file with a section per subsystem. Every key is
//! optional and defaults to the reference parameter set.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use uasn_core::acoustics::ChannelParams;
use uasn_core::agent::LearnerConfig;
use uasn_core::curricula::{CurriculumConfig, CurriculumKind};
use uasn_core::env::{EnvConfig, RewardKind};
use uasn_core::world::WorldConfig;

/// Episode-level settings of the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub reward: RewardKind,
    pub episode_slots: Option<u32>,
    pub fairness_horizon: Option<usize>,
    pub missing_observation_prob: f64,
    pub wind_std_mps: f64,
    pub rate_norm_gamma_db: f64,
}

impl Default for EnvSection {
    fn default() -> Self {
        let e = EnvConfig::default();
        Self {
            reward: e.reward,
            episode_slots: e.episode_slots,
            fairness_horizon: e.fairness_horizon,
            missing_observation_prob: e.missing_observation_prob,
            wind_std_mps: e.wind_std_mps,
            rate_norm_gamma_db: e.rate_norm_gamma_db,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    /// Episodes per evaluation.
    pub runs: usize,
    /// Online learning episodes granted to the tabular Q-learner before it is evaluated.
    pub iql_train_episodes: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self { runs: 20, iql_train_episodes: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Master seed; every episode seed is derived from it.
    pub seed: u64,
    pub world: WorldConfig,
    pub channel: ChannelParams,
    pub env: EnvSection,
    pub trainer: LearnerConfig,
    pub curriculum: CurriculumConfig,
    pub evaluation: EvaluationSection,
}

/// Command-line overrides applied on top of a loaded configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub strategy: Option<CurriculumKind>,
    pub reward: Option<RewardKind>,
    pub episodes: Option<u64>,
    pub pairs: Option<usize>,
    pub malfunction_rate: Option<f64>,
    pub runs: Option<usize>,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).context("invalid configuration")?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Loads `path`, or the defaults when no path is given.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.env_config().validate()?;
        self.trainer.validate()?;
        self.curriculum.validate()?;
        if self.evaluation.runs == 0 {
            bail!("evaluation.runs must be positive");
        }
        Ok(())
    }

    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            world: WorldConfig { seed: self.seed, ..self.world.clone() },
            channel: self.channel,
            reward: self.env.reward,
            episode_slots: self.env.episode_slots,
            fairness_horizon: self.env.fairness_horizon,
            missing_observation_prob: self.env.missing_observation_prob,
            wind_std_mps: self.env.wind_std_mps,
            rate_norm_gamma_db: self.env.rate_norm_gamma_db,
        }
    }

    /// Training overrides. The malfunction rate sets the fixed rate for
    /// `pls` and the upper bound for `sls`/`rls`.
    pub fn apply_training(&mut self, o: &Overrides) -> Result<()> {
        self.apply_common(o);
        if let Some(k) = o.strategy {
            self.curriculum.kind = k;
        }
        if let Some(m) = o.episodes {
            self.curriculum.total_episodes = m;
        }
        if let Some(eps) = o.malfunction_rate {
            match self.curriculum.kind {
                CurriculumKind::Pls => self.curriculum.eps_fixed = eps,
                CurriculumKind::Sls | CurriculumKind::Rls => self.curriculum.eps_upper = eps,
                CurriculumKind::None => bail!("--malfunction-rate has no effect with --strategy none"),
            }
        }
        self.validate()
    }

    /// Evaluation overrides. The malfunction rate applies to the evaluation world.
    pub fn apply_evaluation(&mut self, o: &Overrides) -> Result<()> {
        self.apply_common(o);
        if let Some(eps) = o.malfunction_rate {
            self.world.malfunction_rate = eps;
        }
        self.validate()
    }

    fn apply_common(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(r) = o.reward {
            self.env.reward = r;
        }
        if let Some(n) = o.pairs {
            self.world.n_pairs = n;
        }
        if let Some(r) = o.runs {
            self.evaluation.runs = r;
        }
    }

    /// Hex SHA-256 of the configuration's JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("configuration serializes");
        hex_digest(&Sha256::digest(json))
    }

    pub fn hash_bytes(&self) -> [u8; 32] {
        let json = serde_json::to_vec(self).expect("configuration serializes");
        Sha256::digest(json).into()
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_defaults() {
        let c = Config::from_toml_str("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.world.n_pairs, 3);
        assert_eq!(c.world.battery_j, 5000.0);
        assert_eq!(c.world.power_levels_w, vec![0.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]);
        assert_eq!(c.trainer.learning_rate, 0.0005);
        assert_eq!(c.trainer.batch_size, 32);
        assert_eq!(c.curriculum.utility_threshold, 1.25);
        assert_eq!(c.curriculum.learning_factor, 0.01);
        assert_eq!(c.channel.carrier_freq_khz, 25.0);
    }

    #[test]
    fn sections_parse_and_round_trip() {
        let text = r#"
seed = 9
[world]
n_pairs = 5
[env]
reward = "fr-lh"
[curriculum]
kind = "rls"
total_episodes = 10
"#;
        let c = Config::from_toml_str(text).unwrap();
        assert_eq!((c.seed, c.world.n_pairs, c.env.reward), (9, 5, RewardKind::FrLh));
        assert_eq!(c.curriculum.kind, CurriculumKind::Rls);
        let again = Config::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.hash(), c.hash());
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(Config::from_toml_str("[env]\nbogus = 1\n").is_err());
        assert!(Config::from_toml_str("[world]\nmalfunction_rate = 1.5\n").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = Config::default();
        let mut b = a.clone();
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn malfunction_override_targets() {
        let mut c = Config::default();
        c.apply_training(&Overrides { strategy: Some(CurriculumKind::Rls), malfunction_rate: Some(0.3), ..Default::default() })
            .unwrap();
        assert_eq!(c.curriculum.eps_upper, 0.3);
        let mut c = Config::default();
        c.apply_evaluation(&Overrides { malfunction_rate: Some(0.2), ..Default::default() }).unwrap();
        assert_eq!(c.world.malfunction_rate, 0.2);
    }
}
