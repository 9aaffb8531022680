use std::fs;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{VehicleParams, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::paths::PathGenParams;
use crate::rl::{DdpgConfig, PolicyMode, EPISODE_STEPS};

/// Seed offset of the evaluation path family.
pub const DEFAULT_EVAL_SEED: u64 = 1_000_000;

/// Seed offset of the fresh paths used to re-evaluate the best checkpoint.
pub const REEVAL_SEED_OFFSET: u64 = 10_000_000;

/// Everything that determines a training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub mode: PolicyMode,
    pub seed: u64,
    pub total_updates: u64,
    pub checkpoint_every: u64,
    pub episode_steps: usize,
    pub dt: f64,
    pub eval_paths: usize,
    pub eval_seed: u64,
    pub path_gen: PathGenParams,
    pub vehicle: VehicleParams,
    pub ddpg: DdpgConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: PolicyMode::RevoA,
            seed: 0,
            total_updates: 90_000,
            checkpoint_every: 5000,
            episode_steps: EPISODE_STEPS,
            dt: DEFAULT_DT,
            eval_paths: 100,
            eval_seed: DEFAULT_EVAL_SEED,
            path_gen: PathGenParams::default(),
            vehicle: VehicleParams::default(),
            ddpg: DdpgConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every must be positive".into());
        }
        if !self.total_updates.is_multiple_of(self.checkpoint_every) {
            return bad(format!(
                "total_updates {} is not a multiple of checkpoint_every {}",
                self.total_updates, self.checkpoint_every
            ));
        }
        if self.episode_steps == 0 {
            return bad("episode_steps must be positive".into());
        }
        if !(self.dt > 0.0) {
            return bad("dt must be positive".into());
        }
        if self.seed > i64::MAX as u64 || self.eval_seed > i64::MAX as u64 {
            return bad("seeds must fit in a signed 64-bit integer".into());
        }
        self.vehicle.validate()?;
        self.path_gen.validate(self.vehicle.r_min)?;
        self.ddpg.validate()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        let cfg = Self::from_toml(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// First 16 hex digits of the SHA-256 of the serialized config.
    pub fn hash(&self) -> String {
        let text = self.to_toml().expect("validated configs serialize");
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }

    /// Seed of the random path used by training episode `episode`.
    pub fn training_path_seed(&self, episode: u64) -> u64 {
        self.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(episode)
            .wrapping_add(1 << 40)
    }

    /// Seed of evaluation path `index`.
    pub fn eval_path_seed(&self, index: usize) -> u64 {
        self.eval_seed.wrapping_add(index as u64)
    }
}
