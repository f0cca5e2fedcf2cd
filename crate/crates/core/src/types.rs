//! Domain types shared by every module.

use std::ops::Deref;

use crate::error::{check_finite, Error, Result};

/// Control output of a policy, one entry per actuator.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionVector(Vec<f64>);

impl ActionVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite("action vector", &values)?;
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ActionVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Physical environment state (not including action history).
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState(Vec<f64>);

impl EnvState {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite("environment state", &values)?;
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for EnvState {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// One logged environment step. `state` is the state the action was taken in.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: EnvState,
    pub action: ActionVector,
    pub env_reward: f64,
    pub shaped_reward: f64,
    pub penalty: f64,
    pub done: bool,
}

impl Transition {
    /// Builds a transition, deriving the shaped reward as `env_reward - penalty`.
    pub fn new(
        state: EnvState,
        action: ActionVector,
        env_reward: f64,
        penalty: f64,
        done: bool,
    ) -> Result<Self> {
        if !(penalty >= 0.0) {
            return Err(Error::Invariant(format!("penalty must be >= 0, got {penalty}")));
        }
        check_finite("transition reward", &[env_reward, penalty])?;
        Ok(Self {
            state,
            action,
            env_reward,
            shaped_reward: env_reward - penalty,
            penalty,
            done,
        })
    }
}

/// An episode log together with the settings that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    pub seed: u64,
    pub env_id: String,
    pub penalty_order: u8,
    pub lambda: f64,
}

impl Trajectory {
    pub fn new(
        transitions: Vec<Transition>,
        seed: u64,
        env_id: impl Into<String>,
        penalty_order: u8,
        lambda: f64,
    ) -> Result<Self> {
        let traj = Self {
            transitions,
            seed,
            env_id: env_id.into(),
            penalty_order,
            lambda,
        };
        traj.validate()?;
        Ok(traj)
    }

    /// Checks every trajectory invariant, naming the first one violated.
    pub fn validate(&self) -> Result<()> {
        if self.transitions.is_empty() {
            return Err(Error::Invariant("trajectory must be non-empty".into()));
        }
        if self.penalty_order > 3 {
            return Err(Error::Invariant(format!(
                "penalty_order must be in 0..=3, got {}",
                self.penalty_order
            )));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Invariant(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if self.env_id.is_empty() || self.env_id.contains([',', '|', '\n']) {
            return Err(Error::Invariant(format!("invalid env_id {:?}", self.env_id)));
        }
        let last = self.transitions.len() - 1;
        if let Some(i) = self.transitions[..last].iter().position(|t| t.done) {
            return Err(Error::Invariant(format!(
                "done=true only allowed on the last transition (found at index {i})"
            )));
        }
        let n = self.transitions[0].state.dim();
        let d = self.transitions[0].action.dim();
        for (i, t) in self.transitions.iter().enumerate() {
            if t.state.dim() != n || t.action.dim() != d {
                return Err(Error::Invariant(format!(
                    "transition {i} has dimensions ({}, {}), expected ({n}, {d})",
                    t.state.dim(),
                    t.action.dim()
                )));
            }
            if !(t.penalty >= 0.0) {
                return Err(Error::Invariant(format!("transition {i} has negative penalty")));
            }
            if t.shaped_reward.to_bits() != (t.env_reward - t.penalty).to_bits() {
                return Err(Error::Invariant(format!(
                    "transition {i}: shaped_reward != env_reward - penalty"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Emitted actions in order.
    pub fn actions(&self) -> Vec<ActionVector> {
        self.transitions.iter().map(|t| t.action.clone()).collect()
    }

    pub fn return_raw(&self) -> f64 {
        self.transitions.iter().map(|t| t.env_reward).sum()
    }

    pub fn return_shaped(&self) -> f64 {
        self.transitions.iter().map(|t| t.shaped_reward).sum()
    }
}
