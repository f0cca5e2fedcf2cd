//! Built-in environments and the interface they share.

mod dollhouse;
mod point_tracker;

pub use dollhouse::{thermostat, DollHouse, DollHouseParams, DollHouseState, OutdoorProfile};
pub use point_tracker::{PointTracker, PointTrackerParams};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::types::{ActionVector, EnvState};

/// Static description of an environment's interface.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub id: String,
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub max_episode_steps: usize,
    /// Control period in seconds.
    pub dt: f64,
    /// Typical centre and spread of each state entry, used to scale network inputs.
    pub state_center: Vec<f64>,
    pub state_scale: Vec<f64>,
    /// State entries that hold 0/1 equipment on/off flags.
    pub equipment_indices: Vec<usize>,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        check_dim("action_low", self.action_dim, self.action_low.len())?;
        check_dim("action_high", self.action_dim, self.action_high.len())?;
        check_dim("state_center", self.state_dim, self.state_center.len())?;
        check_dim("state_scale", self.state_dim, self.state_scale.len())?;
        if self
            .action_low
            .iter()
            .zip(&self.action_high)
            .any(|(lo, hi)| !(lo < hi))
        {
            return Err(Error::Invariant("action_low must be < action_high".into()));
        }
        if self.max_episode_steps < 4 {
            return Err(Error::Invariant("max_episode_steps must be >= 4".into()));
        }
        if self.state_scale.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Invariant("state_scale entries must be > 0".into()));
        }
        if self.equipment_indices.iter().any(|&i| i >= self.state_dim) {
            return Err(Error::Invariant("equipment index out of range".into()));
        }
        Ok(())
    }

    /// Clips an action element-wise into the action bounds.
    pub fn clip(&self, action: &ActionVector) -> Result<ActionVector> {
        check_dim("action", self.action_dim, action.dim())?;
        let v = action
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(a, (lo, hi))| a.clamp(*lo, *hi))
            .collect();
        ActionVector::new(v)
    }

    /// Midpoint and half-width of the action box.
    pub fn action_mid_half(&self) -> (Vec<f64>, Vec<f64>) {
        self.action_low
            .iter()
            .zip(&self.action_high)
            .map(|(lo, hi)| (0.5 * (lo + hi), 0.5 * (hi - lo)))
            .unzip()
    }

    /// Equipment on/off flags extracted from a state vector.
    pub fn equipment(&self, state: &[f64]) -> Vec<bool> {
        self.equipment_indices.iter().map(|&i| state[i] > 0.5).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: EnvState,
    pub reward: f64,
    pub done: bool,
}

/// Gym-style episodic environment.
pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    /// Starts a new episode; the initial state is a pure function of `seed`.
    fn reset(&mut self, seed: u64) -> Result<EnvState>;

    /// Applies `action` (clipped to the bounds) and advances one step.
    fn step(&mut self, action: &ActionVector) -> Result<StepResult>;
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn spec(&self) -> &EnvSpec {
        (**self).spec()
    }

    fn reset(&mut self, seed: u64) -> Result<EnvState> {
        (**self).reset(seed)
    }

    fn step(&mut self, action: &ActionVector) -> Result<StepResult> {
        (**self).step(action)
    }
}

/// Per-environment parameter overrides, as read from an experiment config.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvParams {
    #[serde(default)]
    pub point_tracker: PointTrackerParams,
    #[serde(default)]
    pub dollhouse: DollHouseParams,
}

pub const POINT_TRACKER: &str = "point_tracker";
pub const DOLLHOUSE: &str = "dollhouse";

/// Instantiates a built-in environment by id.
pub fn make_env(id: &str, params: &EnvParams) -> Result<Box<dyn Environment>> {
    match id {
        POINT_TRACKER => Ok(Box::new(PointTracker::new(params.point_tracker.clone())?)),
        DOLLHOUSE => Ok(Box::new(DollHouse::new(params.dollhouse.clone())?)),
        other => Err(Error::invalid(format!(
            "unknown env id {other:?} (expected {POINT_TRACKER} or {DOLLHOUSE})"
        ))),
    }
}
