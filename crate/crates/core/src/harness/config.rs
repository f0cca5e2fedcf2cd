use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envs::{EnvParams, DOLLHOUSE, POINT_TRACKER};
use crate::error::{Error, Result};
use crate::trainer::PpoConfig;

/// One derivative-order sweep. Every order shares `ppo`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub env_id: String,
    pub orders: Vec<u8>,
    pub lambda: f64,
    pub seeds: Vec<u64>,
    /// Maximum number of runs in flight.
    pub jobs: usize,
    pub ppo: PpoConfig,
    pub env: EnvParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env_id: POINT_TRACKER.into(),
            orders: vec![0, 1, 2, 3],
            lambda: 0.1,
            seeds: vec![0, 1, 2, 3, 4],
            jobs: 1,
            ppo: PpoConfig::default(),
            env: EnvParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.env_id != POINT_TRACKER && self.env_id != DOLLHOUSE {
            return Err(Error::Config(format!("unknown env_id {:?}", self.env_id)));
        }
        if self.orders.is_empty() || self.orders.iter().any(|o| *o > 3) {
            return Err(Error::Config("orders must be a non-empty subset of {0,1,2,3}".into()));
        }
        if has_duplicates(&self.orders) {
            return Err(Error::Config("orders must be unique".into()));
        }
        if self.seeds.is_empty() || has_duplicates(&self.seeds) {
            return Err(Error::Config("seeds must be non-empty and unique".into()));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be >= 1".into()));
        }
        self.ppo.validate()
    }

    /// Orders in ascending order; results are always reported this way.
    pub fn sorted_orders(&self) -> Vec<u8> {
        let mut o = self.orders.clone();
        o.sort_unstable();
        o
    }

    /// Penalty weight applied at `order`; the baseline carries no penalty.
    pub fn lambda_for(&self, order: u8) -> f64 {
        if order == 0 {
            0.0
        } else {
            self.lambda
        }
    }
}

fn has_duplicates<T: Ord + Clone>(v: &[T]) -> bool {
    let mut s = v.to_vec();
    s.sort();
    s.windows(2).any(|w| w[0] == w[1])
}

/// SHA-256 over the canonical TOML rendering of a PPO config.
pub fn ppo_config_hash(ppo: &PpoConfig) -> String {
    hash_str(&toml::to_string(ppo).expect("PpoConfig serializes"))
}

/// Hash of everything that can change results; `jobs` is left out.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let canonical = ExperimentConfig {
        jobs: 1,
        ..cfg.clone()
    };
    Ok(hash_str(&canonical.to_toml()?))
}

fn hash_str(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = ExperimentConfig::from_toml(
            "env_id = \"dollhouse\"\norders = [3, 0]\n[ppo]\ntotal_steps = 4096\n[env.dollhouse]\nk_heat = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.env_id, DOLLHOUSE);
        assert_eq!(cfg.sorted_orders(), vec![0, 3]);
        assert_eq!(cfg.ppo.total_steps, 4096);
        assert_eq!(cfg.ppo.rollout_len, 2048);
        assert_eq!(cfg.env.dollhouse.k_heat, 0.5);
        assert_eq!(cfg.lambda, 0.1);
    }

    #[test]
    fn typos_are_errors() {
        for text in ["lamda = 0.2", "[ppo]\nclip = 0.1", "[env.dollhouse]\nk_hat = 1.0"] {
            assert!(matches!(ExperimentConfig::from_toml(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn invalid_sets_rejected() {
        for text in ["orders = [0, 4]", "orders = [1, 1]", "seeds = [2, 2]", "seeds = []", "lambda = -1.0", "env_id = \"hopper\""] {
            assert!(ExperimentConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn hash_tracks_ppo_bytes() {
        let a = PpoConfig::default();
        let mut b = a.clone();
        assert_eq!(ppo_config_hash(&a), ppo_config_hash(&b));
        b.clip_eps = 0.21;
        assert_ne!(ppo_config_hash(&a), ppo_config_hash(&b));
        assert_eq!(ppo_config_hash(&a).len(), 64);
    }
}
