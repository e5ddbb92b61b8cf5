//! Run configuration file (TOML) with a schema version.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::geometry::Field;
use crate::metrics::RecoveryConfig;
use crate::reward::RewardConfig;
use crate::rollout::SimConfig;
use crate::trainer::TrainConfig;
use crate::vision::VisionConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default)]
    pub vision: VisionConfig,
    #[serde(default)]
    pub eval: SimConfig,
    #[serde(default)]
    pub recovery: RecoveryConfig,
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            output_dir: None,
            seeds: default_seeds(),
            env: EnvConfig::default(),
            train: TrainConfig::default(),
            reward: RewardConfig::default(),
            vision: VisionConfig::default(),
            eval: SimConfig::default(),
            recovery: RecoveryConfig::default(),
        }
    }
}

impl RunConfig {
    /// 25 sensors on a 250 m field, fresh deployments of 40 steps per episode.
    pub fn desk() -> Self {
        let env = EnvConfig {
            field: Field { width: 250.0, height: 250.0, cell_size: 1.0 },
            n_sensors: 25,
            steps_per_episode: 40,
            ..EnvConfig::default()
        };
        let mut train = TrainConfig { episodes: 150, redeploy_each_episode: true, ..TrainConfig::default() };
        // 6000 updates per agent are too few to resolve action gaps under a 0.99 discount.
        train.learner.discount = 0.5;
        train.learner.adam.learning_rate = 1e-3;
        let eval = SimConfig { episodes: 10, redeploy_each_episode: true, ..SimConfig::default() };
        Self { env, train, eval, reward: RewardConfig::shaped(), ..Self::default() }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::InvalidConfig(msg) => Error::InvalidConfig(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.env.validate()?;
        self.train.validate()?;
        self.reward.validate()?;
        self.vision.validate()?;
        if self.recovery.threshold <= 0.0 || self.recovery.threshold > 1.0 {
            return Err(Error::InvalidConfig("recovery.threshold must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let cfg = RunConfig::desk();
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let cfg = RunConfig::parse("schema_version = 1\n").unwrap();
        assert_eq!(cfg.env.n_sensors, 100);
        assert_eq!(cfg.train.learner.batch, 64);
    }

    #[test]
    fn unknown_key_is_line_anchored() {
        let err = RunConfig::parse("schema_version = 1\n\n[env]\nn_sensor = 3\n").unwrap_err().to_string();
        assert!(err.contains("line 4") && err.contains("n_sensor"), "{err}");
    }

    #[test]
    fn wrong_schema_rejected() {
        assert!(RunConfig::parse("schema_version = 2\n").is_err());
    }
}
