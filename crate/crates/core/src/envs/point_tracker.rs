//! Planar double integrator that must drive a point onto a random target.

use serde::{Deserialize, Serialize};

use super::{EnvSpec, Environment, StepResult, POINT_TRACKER};
use crate::error::{check_dim, Error, Result};
use crate::rng::SeededRng;
use crate::types::{ActionVector, EnvState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PointTrackerParams {
    pub dt: f64,
    pub max_episode_steps: usize,
    pub action_cost: f64,
}

impl Default for PointTrackerParams {
    fn default() -> Self {
        Self {
            dt: 0.05,
            max_episode_steps: 200,
            action_cost: 0.01,
        }
    }
}

/// State layout: `[px, py, vx, vy, tx, ty]`; action: acceleration in `[-1, 1]^2`.
#[derive(Debug, Clone)]
pub struct PointTracker {
    params: PointTrackerParams,
    spec: EnvSpec,
    pos: [f64; 2],
    vel: [f64; 2],
    target: [f64; 2],
    steps: usize,
}

impl PointTracker {
    pub fn new(params: PointTrackerParams) -> Result<Self> {
        if !(params.dt > 0.0) || !(params.action_cost >= 0.0) {
            return Err(Error::invalid("point_tracker: dt must be > 0 and action_cost >= 0"));
        }
        let spec = EnvSpec {
            id: POINT_TRACKER.into(),
            state_dim: 6,
            action_dim: 2,
            action_low: vec![-1.0; 2],
            action_high: vec![1.0; 2],
            max_episode_steps: params.max_episode_steps,
            dt: params.dt,
            state_center: vec![0.0; 6],
            state_scale: vec![1.0; 6],
            equipment_indices: vec![],
        };
        spec.validate()?;
        Ok(Self {
            params,
            spec,
            pos: [0.0; 2],
            vel: [0.0; 2],
            target: [0.0; 2],
            steps: 0,
        })
    }

    /// Overwrites the physical state, e.g. to start from a hand-picked configuration.
    pub fn set_state(&mut self, pos: [f64; 2], vel: [f64; 2], target: [f64; 2]) {
        self.pos = pos;
        self.vel = vel;
        self.target = target;
        self.steps = 0;
    }

    pub fn state(&self) -> EnvState {
        EnvState::new(vec![
            self.pos[0],
            self.pos[1],
            self.vel[0],
            self.vel[1],
            self.target[0],
            self.target[1],
        ])
        .expect("point tracker state is finite")
    }
}

impl Environment for PointTracker {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Result<EnvState> {
        let mut rng = SeededRng::new(seed);
        let target = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
        self.set_state([0.0; 2], [0.0; 2], target);
        Ok(self.state())
    }

    fn step(&mut self, action: &ActionVector) -> Result<StepResult> {
        check_dim("point_tracker action", 2, action.dim())?;
        let a = self.spec.clip(action)?;
        let dt = self.params.dt;
        for i in 0..2 {
            self.pos[i] += self.vel[i] * dt;
            self.vel[i] += a[i] * dt;
        }
        self.steps += 1;
        let dist2: f64 = (0..2).map(|i| (self.pos[i] - self.target[i]).powi(2)).sum();
        let effort: f64 = a.iter().map(|x| x * x).sum();
        let reward = -dist2 - self.params.action_cost * effort;
        let state = self.state();
        if state.iter().any(|v| v.abs() > 1e6) {
            return Err(Error::Diverged("point tracker state exceeded 1e6".into()));
        }
        Ok(StepResult {
            state,
            reward,
            done: self.steps >= self.params.max_episode_steps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> PointTracker {
        PointTracker::new(PointTrackerParams::default()).unwrap()
    }

    fn act(v: &[f64]) -> ActionVector {
        ActionVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn reward_zero_at_optimum() {
        let mut e = env();
        e.set_state([0.3, -0.2], [0.0; 2], [0.3, -0.2]);
        assert_eq!(e.step(&act(&[0.0, 0.0])).unwrap().reward, 0.0);
    }

    #[test]
    fn unit_distance_costs_one() {
        let mut e = env();
        e.set_state([1.0, 0.0], [0.0; 2], [0.0, 0.0]);
        assert_eq!(e.step(&act(&[0.0, 0.0])).unwrap().reward, -1.0);
    }

    #[test]
    fn zero_policy_matches_closed_form() {
        // Under zero acceleration: p_k = p_0 + k v_0 dt, v_k = v_0.
        let mut e = env();
        let (p0, v0) = ([0.1, -0.4], [0.7, 0.25]);
        e.set_state(p0, v0, [0.0; 2]);
        let dt = 0.05;
        for k in 1..=10 {
            let s = e.step(&act(&[0.0, 0.0])).unwrap().state;
            for i in 0..2 {
                let expect = p0[i] + k as f64 * v0[i] * dt;
                assert!((s[i] - expect).abs() < 1e-12);
                assert_eq!(s[2 + i], v0[i]);
            }
        }
    }

    #[test]
    fn constant_acceleration_matches_closed_form() {
        // Position update uses the pre-step velocity:
        // p_k = p_0 + k v_0 dt + a dt^2 k (k - 1) / 2.
        let mut e = env();
        e.set_state([0.0; 2], [0.0; 2], [0.0; 2]);
        let a = [0.5, -1.0];
        let dt = 0.05;
        for k in 1..=10 {
            let s = e.step(&act(&a)).unwrap().state;
            for i in 0..2 {
                let kf = k as f64;
                let expect = a[i] * dt * dt * kf * (kf - 1.0) / 2.0;
                assert!((s[i] - expect).abs() < 1e-12);
                assert!((s[2 + i] - a[i] * dt * kf).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn out_of_bounds_action_is_clipped() {
        let mut a = env();
        let mut b = env();
        a.reset(3).unwrap();
        b.reset(3).unwrap();
        let ra = a.step(&act(&[5.0, -9.0])).unwrap();
        let rb = b.step(&act(&[1.0, -1.0])).unwrap();
        assert_eq!(ra, rb);
    }

    #[test]
    fn reset_is_deterministic_and_in_range() {
        let mut e = env();
        let s1 = e.reset(0).unwrap();
        let s2 = e.reset(0).unwrap();
        assert_eq!(s1, s2);
        assert!(s1[4].abs() <= 1.0 && s1[5].abs() <= 1.0);
        assert_ne!(e.reset(1).unwrap(), s1);
    }

    #[test]
    fn episode_ends_after_max_steps() {
        let mut e = env();
        e.reset(0).unwrap();
        for k in 1..=200 {
            let r = e.step(&act(&[0.0, 0.0])).unwrap();
            assert_eq!(r.done, k == 200);
        }
    }
}
