use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub total_steps: usize,
    pub rollout_len: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub learning_rate: f64,
    /// Initial value of every policy log-std entry.
    pub init_log_std: f64,
    /// Scale rewards by a running std of the discounted return before GAE.
    pub normalize_rewards: bool,
    /// Evaluate the deterministic policy every this many environment steps.
    pub eval_interval: usize,
    pub eval_episodes: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            total_steps: 100_000,
            rollout_len: 2048,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            epochs: 10,
            minibatch_size: 64,
            value_coef: 0.5,
            entropy_coef: 0.0,
            max_grad_norm: 0.5,
            learning_rate: 3e-4,
            init_log_std: 0.0,
            normalize_rewards: true,
            eval_interval: 20_480,
            eval_episodes: 5,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("ppo: {m}")));
        if self.rollout_len < 4 {
            return bad("rollout_len must be >= 4");
        }
        if self.minibatch_size == 0 || self.minibatch_size > self.rollout_len {
            return bad("minibatch_size must be in 1..=rollout_len");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must be in [0, 1]");
        }
        if !(self.clip_eps > 0.0) {
            return bad("clip_eps must be > 0");
        }
        if self.epochs == 0 || self.total_steps == 0 {
            return bad("epochs and total_steps must be >= 1");
        }
        if !(self.max_grad_norm > 0.0) || !(self.learning_rate > 0.0) {
            return bad("max_grad_norm and learning_rate must be > 0");
        }
        if self.eval_episodes == 0 || self.eval_interval == 0 {
            return bad("eval_episodes and eval_interval must be >= 1");
        }
        Ok(())
    }
}
