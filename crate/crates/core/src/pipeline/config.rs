use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::augment::AugmentConfig;
use super::optim::AdamConfig;
use crate::error::{config_err, io_err, Result};
use crate::model::ModelConfig;

/// Optimization and augmentation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub flip_prob: f64,
    pub rotation_degrees: f64,
    pub w_ce: f64,
    pub w_dice: f64,
    /// Validate every this many epochs (and after the last one).
    pub eval_every: usize,
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.epsilon,
        }
    }

    pub fn augmentation(&self) -> AugmentConfig {
        AugmentConfig {
            flip_prob: self.flip_prob,
            rotation_degrees: self.rotation_degrees,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return config_err(format!("learning rate {} must be finite and non-negative", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return config_err("adam betas must lie in [0, 1) and epsilon must be positive");
        }
        if self.batch_size == 0 || self.epochs == 0 || self.eval_every == 0 {
            return config_err("batch size, epochs and eval_every must be positive");
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return config_err(format!("flip probability {} outside [0, 1]", self.flip_prob));
        }
        if !(0.0..=180.0).contains(&self.rotation_degrees) {
            return config_err(format!("rotation range {} outside [0, 180]", self.rotation_degrees));
        }
        if self.w_ce < 0.0 || self.w_dice < 0.0 {
            return config_err("loss weights must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Dataset root holding `images/` and `masks/`; relative paths are
    /// resolved against the config file's directory.
    pub root: PathBuf,
    /// Fraction of cases assigned to training.
    pub split_ratio: f64,
}

/// A complete run description: `[model]`, `[train]` and `[data]` tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg = Self::from_toml(&text)?;
        if cfg.data.root.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.data.root = dir.join(&cfg.data.root);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if !(0.0..=1.0).contains(&self.data.split_ratio) {
            return config_err(format!("split ratio {} outside [0, 1]", self.data.split_ratio));
        }
        Ok(())
    }
}
