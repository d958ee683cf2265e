//! Run configuration: one TOML document covering the environment, both
//! agents, the subgoal space, training budget and evaluation. Every field
//! has a default and unknown keys are rejected.
//!
//! ```toml
//! mode = "hrl"            # or "td3" for the flat controller
//! seed = 1
//! worlds = ["corridor"]   # built-in names or world file paths
//! output_dir = "runs/corridor"
//!
//! [env]
//! max_steps = 500
//!
//! [hierarchy]
//! training_mode = "alternating"
//!
//! [training]
//! episodes = 3000
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{DqnConfig, Td3Config};
use crate::benchmarks::EvalOptions;
use crate::hierarchy::{HierarchyConfig, LearnerKind, LearnerSetup, TrainConfig, UpdateSchedule};
use crate::rewards::{HighRewardWeights, LowRewardWeights};
use crate::simworld::{load_world, EnvConfig, World, WorldError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("world `{name}`: {source}")]
    World { name: String, source: WorldError },
}

impl ConfigError {
    /// True when the failure came from reading a file rather than its contents.
    pub fn is_io(&self) -> bool {
        matches!(self, ConfigError::Io { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardsConfig {
    pub high: HighRewardWeights,
    pub low: LowRewardWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub episodes: usize,
    pub seed: u64,
    /// A* reference grid resolution in metres; 0 disables the reference.
    pub astar_resolution: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { episodes: 100, seed: 1_000_003, astar_resolution: 0.1 }
    }
}

impl EvalConfig {
    pub fn options(&self) -> EvalOptions {
        EvalOptions {
            episodes: self.episodes,
            seed: self.seed,
            astar_resolution: (self.astar_resolution > 0.0).then_some(self.astar_resolution),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: LearnerKind,
    pub seed: u64,
    pub worlds: Vec<String>,
    pub output_dir: PathBuf,
    pub env: EnvConfig,
    pub hierarchy: HierarchyConfig,
    pub rewards: RewardsConfig,
    pub dqn: DqnConfig,
    pub td3: Td3Config,
    pub schedule: UpdateSchedule,
    pub training: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: LearnerKind::Hierarchical,
            seed: 0,
            worlds: vec!["empty".into()],
            output_dir: PathBuf::from("runs/default"),
            env: EnvConfig::default(),
            hierarchy: HierarchyConfig::default(),
            rewards: RewardsConfig::default(),
            dqn: DqnConfig::default(),
            td3: Td3Config::default(),
            schedule: UpdateSchedule::default(),
            training: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative world paths are resolved against the
    /// file's directory and stored absolute.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for w in &mut cfg.worlds {
            if World::builtin_names().contains(&w.as_str()) {
                continue;
            }
            let p = Path::new(w.as_str());
            if p.is_relative() {
                *w = absolute(&base.join(p)).to_string_lossy().into_owned();
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.worlds.is_empty() {
            return Err(ConfigError::Invalid("at least one world is required".into()));
        }
        self.hierarchy.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.training.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let env = &self.env;
        if !(env.dt > 0.0) || env.n_beams == 0 || !(env.max_range > 0.0) || env.max_steps == 0 {
            return Err(ConfigError::Invalid("env needs dt > 0, n_beams >= 1, max_range > 0, max_steps >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dqn.gamma) || !(0.0..1.0).contains(&self.td3.gamma) {
            return Err(ConfigError::Invalid("discount factors must lie in [0, 1)".into()));
        }
        if self.td3.batch_size == 0 || self.dqn.batch_size == 0 {
            return Err(ConfigError::Invalid("batch sizes must be positive".into()));
        }
        if self.td3.buffer_capacity == 0 || self.dqn.buffer_capacity == 0 {
            return Err(ConfigError::Invalid("replay capacities must be positive".into()));
        }
        if self.schedule.update_every == 0 {
            return Err(ConfigError::Invalid("schedule.update_every must be positive".into()));
        }
        Ok(())
    }

    pub fn learner_setup(&self) -> LearnerSetup {
        LearnerSetup {
            env: self.env.clone(),
            hierarchy: self.hierarchy.clone(),
            high_rewards: self.rewards.high,
            low_rewards: self.rewards.low,
            dqn: self.dqn.clone(),
            td3: self.td3.clone(),
            schedule: self.schedule,
        }
    }

    pub fn load_worlds(&self) -> Result<Vec<Arc<World>>, ConfigError> {
        self.worlds.iter().map(|w| resolve_world(w).map(Arc::new)).collect()
    }
}

/// A built-in world name or a world file path.
pub fn resolve_world(name: &str) -> Result<World, ConfigError> {
    if World::builtin_names().contains(&name) {
        return World::builtin(name).map_err(|source| ConfigError::World { name: name.into(), source });
    }
    let path = Path::new(name);
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    load_world(&text).map_err(|source| ConfigError::World { name: name.into(), source })
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml("seed = 1\n[td3]\nlearning_rate = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("learning_rate"), "{err}");
        let err = RunConfig::from_toml("sed = 1\n").unwrap_err();
        assert!(err.to_string().contains("sed"), "{err}");
    }

    #[test]
    fn mode_names() {
        assert_eq!(RunConfig::from_toml("mode = \"td3\"").unwrap().mode, LearnerKind::Flat);
        assert_eq!(RunConfig::from_toml("mode = \"hrl\"").unwrap().mode, LearnerKind::Hierarchical);
        assert!(RunConfig::from_toml("mode = \"dqn\"").is_err());
    }
}
