//! Run configuration file (TOML). Every field has a default and unknown keys
//! are rejected; the resolved text is embedded in checkpoints.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::EnvConfig;
use crate::error::{ConfigError, Error, Result};
use crate::ppo::{PpoHyper, TrainConfig};

/// Evaluation defaults used by `eval` when flags are absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub frequency: f64,
    pub amplitude: f64,
    pub vx: f64,
    pub episodes: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            frequency: 2.0,
            amplitude: 0.05,
            vx: 0.5,
            episodes: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub env: EnvConfig,
    pub ppo: PpoHyper,
    pub eval: EvalSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("runs"),
            env: EnvConfig::default(),
            ppo: PpoHyper::default(),
            eval: EvalSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(ConfigError::from)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self).map_err(ConfigError::from)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.ppo.validate()?;
        let e = &self.eval;
        if !(e.frequency > 0.0 && e.amplitude >= 0.0 && e.vx.is_finite()) {
            return Err(ConfigError::Invalid("eval settings invalid".into()).into());
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            env: self.env.clone(),
            ppo: self.ppo.clone(),
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_fixed_point() {
        let mut c = RunConfig::default();
        c.seed = 17;
        c.ppo.total_steps = 12_345;
        c.env.bridge.frequency_max = 3.5;
        let text = c.to_toml().unwrap();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let c = RunConfig::parse("seed = 4\n[ppo]\nnum_envs = 8\n").unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.ppo.num_envs, 8);
        assert_eq!(c.env, EnvConfig::default());
    }

    #[test]
    fn unknown_and_invalid_keys_rejected() {
        assert!(matches!(RunConfig::parse("sede = 4\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("[ppo]\nbogus = 1\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("[ppo]\nnum_envs = 0\n"), Err(Error::Config(_))));
    }
}
