//! Action-history augmentation and derivative penalties.
//!
//! The observation seen by a policy is `[s_t, a_{t-1}, a_{t-2}, a_{t-3}]`.
//! The penalty for order `k` is `lambda * || sum_j c_j a_{t-j} ||^2` where
//! `c` are the alternating-sign binomial coefficients of the k-th backward
//! difference. Differences are not divided by the control period.

use serde::{Deserialize, Serialize};

use crate::envs::{EnvSpec, Environment, StepResult};
use crate::error::{check_dim, Error, Result};
use crate::types::{ActionVector, EnvState};

/// Backward-difference coefficients for orders 0 through 3.
const COEFFS: [&[f64]; 4] = [&[], &[1.0, -1.0], &[1.0, -2.0, 1.0], &[1.0, -3.0, 3.0, -1.0]];

/// Coefficients `c_j` applied to `a_{t-j}`, `j = 0..=order`. Empty for order 0.
pub fn difference_coefficients(order: u8) -> &'static [f64] {
    COEFFS[usize::from(order.min(3))]
}

/// The last three emitted actions, most recent first.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionHistory {
    slots: [ActionVector; 3],
}

impl ActionHistory {
    /// Episode-start history: every slot is the zero action.
    pub fn zeros(dim: usize) -> Self {
        Self {
            slots: [ActionVector::zeros(dim), ActionVector::zeros(dim), ActionVector::zeros(dim)],
        }
    }

    pub fn from_actions(prev1: ActionVector, prev2: ActionVector, prev3: ActionVector) -> Result<Self> {
        let d = prev1.dim();
        check_dim("action history", d, prev2.dim())?;
        check_dim("action history", d, prev3.dim())?;
        Ok(Self {
            slots: [prev1, prev2, prev3],
        })
    }

    pub fn dim(&self) -> usize {
        self.slots[0].dim()
    }

    /// `a_{t-k}` for `k` in `1..=3`.
    pub fn prev(&self, k: usize) -> &ActionVector {
        &self.slots[k - 1]
    }

    /// Returns the history after emitting `action`; the oldest slot is dropped.
    pub fn push(&self, action: ActionVector) -> Result<Self> {
        check_dim("action history push", self.dim(), action.dim())?;
        Ok(Self {
            slots: [action, self.slots[0].clone(), self.slots[1].clone()],
        })
    }

    fn push_in_place(&mut self, action: ActionVector) {
        self.slots.rotate_right(1);
        self.slots[0] = action;
    }
}

/// `[state, a_{t-1}, a_{t-2}, a_{t-3}]`.
pub fn augment(state: &EnvState, history: &ActionHistory) -> Vec<f64> {
    let mut out = Vec::with_capacity(state.dim() + 3 * history.dim());
    out.extend_from_slice(state);
    for slot in &history.slots {
        out.extend_from_slice(slot);
    }
    out
}

/// Same as [`augment`] but checks the history against the expected action dimension.
pub fn augment_checked(state: &EnvState, history: &ActionHistory, action_dim: usize) -> Result<Vec<f64>> {
    check_dim("augment: action history dimension d", action_dim, history.dim())?;
    Ok(augment(state, history))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    order: u8,
    lambda: f64,
}

impl PenaltyConfig {
    pub fn new(order: u8, lambda: f64) -> Result<Self> {
        if order > 3 {
            return Err(Error::invalid(format!("penalty order must be 0..=3, got {order}")));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        Ok(Self { order, lambda })
    }

    pub fn baseline() -> Self {
        Self { order: 0, lambda: 0.0 }
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// `lambda * || sum_j c_j a_{t-j} ||^2` for the configured order.
pub fn compute_penalty(config: &PenaltyConfig, action: &ActionVector, history: &ActionHistory) -> Result<f64> {
    check_dim("penalty: action vs history", history.dim(), action.dim())?;
    if config.order == 0 {
        return Ok(0.0);
    }
    // Nested backward differences: algebraically sum_j c_j a_{t-j}, but exact
    // (zero) whenever the sequence is constant.
    let mut sq = 0.0;
    for i in 0..action.dim() {
        let mut diffs = [action[i], history.prev(1)[i], history.prev(2)[i], history.prev(3)[i]];
        for level in 1..=usize::from(config.order) {
            for j in 0..=(3 - level) {
                diffs[j] -= diffs[j + 1];
            }
        }
        sq += diffs[0] * diffs[0];
    }
    Ok(config.lambda * sq)
}

pub fn shape_reward(env_reward: f64, penalty: f64) -> f64 {
    env_reward - penalty
}

/// Output of one wrapped step with every reward component kept apart.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapedStep {
    /// Augmented observation for the next decision.
    pub observation: Vec<f64>,
    /// Raw next state of the inner environment.
    pub state: EnvState,
    /// The action actually applied, after clipping to the bounds.
    pub applied_action: ActionVector,
    pub env_reward: f64,
    pub penalty: f64,
    pub shaped_reward: f64,
    pub done: bool,
}

/// Wraps an environment with history augmentation and a derivative penalty.
pub struct SmoothedEnv<E> {
    inner: E,
    config: PenaltyConfig,
    history: ActionHistory,
    spec: EnvSpec,
    last_state: Option<EnvState>,
}

impl<E: Environment> SmoothedEnv<E> {
    pub fn new(inner: E, config: PenaltyConfig) -> Self {
        let inner_spec = inner.spec();
        let d = inner_spec.action_dim;
        let (mid, half) = inner_spec.action_mid_half();
        let mut spec = inner_spec.clone();
        spec.state_dim = inner_spec.state_dim + 3 * d;
        for _ in 0..3 {
            spec.state_center.extend_from_slice(&mid);
            spec.state_scale.extend_from_slice(&half);
        }
        spec.equipment_indices = inner_spec.equipment_indices.clone();
        Self {
            history: ActionHistory::zeros(d),
            inner,
            config,
            spec,
            last_state: None,
        }
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }

    pub fn inner_spec(&self) -> &EnvSpec {
        self.inner.spec()
    }

    pub fn config(&self) -> &PenaltyConfig {
        &self.config
    }

    pub fn history(&self) -> &ActionHistory {
        &self.history
    }

    /// Raw state the next action will be taken in.
    pub fn current_state(&self) -> Option<&EnvState> {
        self.last_state.as_ref()
    }

    /// Resets the inner environment and zero-fills the history.
    pub fn reset_augmented(&mut self, seed: u64) -> Result<Vec<f64>> {
        let state = self.inner.reset(seed)?;
        self.history = ActionHistory::zeros(self.inner.spec().action_dim);
        let obs = augment(&state, &self.history);
        self.last_state = Some(state);
        Ok(obs)
    }

    pub fn step_shaped(&mut self, action: &ActionVector) -> Result<ShapedStep> {
        let applied = self.inner.spec().clip(action)?;
        let penalty = compute_penalty(&self.config, &applied, &self.history)?;
        let StepResult { state, reward, done } = self.inner.step(&applied)?;
        self.history.push_in_place(applied.clone());
        let observation = augment(&state, &self.history);
        self.last_state = Some(state.clone());
        Ok(ShapedStep {
            observation,
            state,
            applied_action: applied,
            env_reward: reward,
            penalty,
            shaped_reward: shape_reward(reward, penalty),
            done,
        })
    }
}

impl<E: Environment> Environment for SmoothedEnv<E> {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Result<EnvState> {
        EnvState::new(self.reset_augmented(seed)?)
    }

    fn step(&mut self, action: &ActionVector) -> Result<StepResult> {
        let s = self.step_shaped(action)?;
        Ok(StepResult {
            state: EnvState::new(s.observation)?,
            reward: s.shaped_reward,
            done: s.done,
        })
    }
}

pub fn wrap_env<E: Environment>(env: E, config: PenaltyConfig) -> SmoothedEnv<E> {
    SmoothedEnv::new(env, config)
}
