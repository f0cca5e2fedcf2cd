use crate::envs::{EnvSpec, Environment};
use crate::error::Result;
use crate::nn::{GaussianPolicy, MlpParams};
use crate::rng::SeededRng;
use crate::smoothing::SmoothedEnv;
use crate::types::ActionVector;

use super::gae::{compute_gae, normalize_advantages};

/// Maps raw (augmented) observations to network inputs using the [`EnvSpec`]'s
/// nominal centre and spread of every entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsNormalizer {
    center: Vec<f64>,
    scale: Vec<f64>,
}

impl ObsNormalizer {
    pub fn from_spec(spec: &EnvSpec) -> Self {
        Self {
            center: spec.state_center.clone(),
            scale: spec.state_scale.clone(),
        }
    }

    pub fn apply(&self, obs: &[f64]) -> Vec<f64> {
        obs.iter()
            .zip(self.center.iter().zip(&self.scale))
            .map(|(o, (c, s))| (o - c) / s)
            .collect()
    }
}

/// The policy acts in a unit box; `env = mid + half * u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionScaler {
    mid: Vec<f64>,
    half: Vec<f64>,
}

impl ActionScaler {
    pub fn from_spec(spec: &EnvSpec) -> Self {
        let (mid, half) = spec.action_mid_half();
        Self { mid, half }
    }

    pub fn to_env(&self, u: &[f64]) -> Result<ActionVector> {
        ActionVector::new(u.iter().zip(self.mid.iter().zip(&self.half)).map(|(u, (m, h))| m + h * u).collect())
    }
}

/// Where the rollout left off: the pending observation, if mid-episode.
#[derive(Debug, Clone)]
pub struct RolloutCursor {
    obs: Option<Vec<f64>>,
    episode_seeds: SeededRng,
    episode_return: f64,
}

impl RolloutCursor {
    pub fn new(episode_seeds: SeededRng) -> Self {
        Self {
            obs: None,
            episode_seeds,
            episode_return: 0.0,
        }
    }
}

/// Fixed-length slice of experience, aligned index-by-index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RolloutBatch {
    /// Normalized network inputs.
    pub observations: Vec<Vec<f64>>,
    /// Unclipped policy-space samples.
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub env_rewards: Vec<f64>,
    pub shaped_rewards: Vec<f64>,
    pub penalties: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub bootstrap_value: f64,
    /// Raw returns of episodes that finished inside this batch.
    pub finished_episode_returns: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Fills `advantages`/`returns` from shaped rewards and normalizes the advantages.
    pub fn finish(&mut self, gamma: f64, lambda: f64) -> Result<()> {
        let rewards = self.shaped_rewards.clone();
        self.finish_with(&rewards, gamma, lambda)
    }

    /// As [`RolloutBatch::finish`], with `rewards` standing in for the shaped rewards.
    pub fn finish_with(&mut self, rewards: &[f64], gamma: f64, lambda: f64) -> Result<()> {
        let (mut adv, ret) = compute_gae(
            rewards,
            &self.values,
            &self.dones,
            self.bootstrap_value,
            gamma,
            lambda,
        )?;
        normalize_advantages(&mut adv);
        self.advantages = adv;
        self.returns = ret;
        Ok(())
    }
}

/// Divides rewards by a running standard deviation of the discounted return,
/// so value targets stay O(1) whatever the reward scale.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardScaler {
    gamma: f64,
    ret: f64,
    count: f64,
    mean: f64,
    m2: f64,
}

impl RewardScaler {
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            ret: 0.0,
            count: 0.0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    pub fn std(&self) -> f64 {
        if self.count < 2.0 {
            1.0
        } else {
            (self.m2 / self.count).sqrt()
        }
    }

    /// Updates the statistics with a batch, then scales it with the updated std.
    pub fn scale(&mut self, rewards: &[f64], dones: &[bool]) -> Vec<f64> {
        for (r, d) in rewards.iter().zip(dones) {
            self.ret = self.ret * self.gamma + r;
            self.count += 1.0;
            let delta = self.ret - self.mean;
            self.mean += delta / self.count;
            self.m2 += delta * (self.ret - self.mean);
            if *d {
                self.ret = 0.0;
            }
        }
        let s = self.std().max(1e-8);
        rewards.iter().map(|r| r / s).collect()
    }
}

/// Runs the stochastic policy for exactly `len` steps, resetting at episode ends.
#[allow(clippy::too_many_arguments)]
pub fn collect_rollout<E: Environment>(
    env: &mut SmoothedEnv<E>,
    cursor: &mut RolloutCursor,
    policy: &GaussianPolicy,
    value: &MlpParams,
    normalizer: &ObsNormalizer,
    scaler: &ActionScaler,
    len: usize,
    rng: &mut SeededRng,
) -> Result<RolloutBatch> {
    let mut batch = RolloutBatch::default();
    for _ in 0..len {
        let raw_obs = match cursor.obs.take() {
            Some(o) => o,
            None => {
                cursor.episode_return = 0.0;
                env.reset_augmented(cursor.episode_seeds.next_u64())?
            }
        };
        let obs = normalizer.apply(&raw_obs);
        let v = value.forward(&obs)?[0];
        let (u, lp) = policy.sample(&obs, rng)?;
        let step = env.step_shaped(&scaler.to_env(&u)?)?;
        cursor.episode_return += step.env_reward;
        if step.done {
            batch.finished_episode_returns.push(cursor.episode_return);
        } else {
            cursor.obs = Some(step.observation);
        }
        batch.observations.push(obs);
        batch.actions.push(u);
        batch.log_probs.push(lp);
        batch.env_rewards.push(step.env_reward);
        batch.shaped_rewards.push(step.shaped_reward);
        batch.penalties.push(step.penalty);
        batch.values.push(v);
        batch.dones.push(step.done);
    }
    batch.bootstrap_value = match &cursor.obs {
        Some(o) => value.forward(&normalizer.apply(o))?[0],
        None => 0.0,
    };
    Ok(batch)
}
