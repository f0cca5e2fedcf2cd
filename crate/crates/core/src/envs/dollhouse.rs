//! Two-zone "DollHouse" thermal model with hysteretic heater thermostats.
//!
//! Each step, with heater states latched by the thermostat and `j` the other
//! zone:
//!
//! ```text
//! heater_i <- thermostat(T_i, setpoint_i, heater_i, h)
//! T_i      <- T_i + k_out (T_out - T_i) + k_zone damper (T_j - T_i) + k_heat heater_i
//! T_out    <- mean + amplitude sin(2 pi step / period)
//! reward    = -energy_weight (heater_1 + heater_2)
//!             - comfort_weight sum_i max(0, low - T_i, T_i - high)^2
//! ```
//!
//! Observation layout: `[T1, T2, T_out, heater1, heater2]` with heaters as 0/1.
//! Action layout: `[setpoint1, setpoint2, damper]`.

use serde::{Deserialize, Serialize};

use super::{EnvSpec, Environment, StepResult, DOLLHOUSE};
use crate::error::{check_dim, Error, Result};
use crate::rng::SeededRng;
use crate::types::{ActionVector, EnvState};

pub const SETPOINT_LOW: f64 = 15.0;
pub const SETPOINT_HIGH: f64 = 30.0;
const SANITY_LOW: f64 = -50.0;
const SANITY_HIGH: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutdoorProfile {
    pub mean: f64,
    pub amplitude: f64,
    /// Period in steps.
    pub period: f64,
}

impl Default for OutdoorProfile {
    fn default() -> Self {
        Self {
            mean: 10.0,
            amplitude: 5.0,
            period: 480.0,
        }
    }
}

impl OutdoorProfile {
    pub fn at(&self, step: usize) -> f64 {
        self.mean + self.amplitude * (2.0 * std::f64::consts::PI * step as f64 / self.period).sin()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DollHouseParams {
    /// Envelope loss coefficient, 1/step.
    pub k_out: f64,
    /// Inter-zone coupling through the open damper, 1/step.
    pub k_zone: f64,
    /// Heater gain, degC/step.
    pub k_heat: f64,
    /// Thermostat half-band, degC.
    pub hysteresis: f64,
    pub comfort_low: f64,
    pub comfort_high: f64,
    pub energy_weight: f64,
    pub comfort_weight: f64,
    pub outdoor: OutdoorProfile,
    pub max_episode_steps: usize,
    /// Control period in seconds.
    pub dt: f64,
}

impl Default for DollHouseParams {
    fn default() -> Self {
        Self {
            k_out: 0.05,
            k_zone: 0.03,
            k_heat: 0.8,
            hysteresis: 0.5,
            comfort_low: 20.0,
            comfort_high: 24.0,
            energy_weight: 0.1,
            comfort_weight: 1.0,
            outdoor: OutdoorProfile::default(),
            max_episode_steps: 480,
            dt: 180.0,
        }
    }
}

impl DollHouseParams {
    pub fn validate(&self) -> Result<()> {
        let coeffs = [
            self.k_out,
            self.k_zone,
            self.k_heat,
            self.energy_weight,
            self.comfort_weight,
        ];
        if coeffs.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(Error::invalid("dollhouse: coefficients and weights must be finite and >= 0"));
        }
        if !(self.comfort_low < self.comfort_high) {
            return Err(Error::invalid("dollhouse: comfort_low must be < comfort_high"));
        }
        if !(self.hysteresis > 0.0) {
            return Err(Error::invalid("dollhouse: hysteresis must be > 0"));
        }
        if !(self.outdoor.period > 0.0) {
            return Err(Error::invalid("dollhouse: outdoor period must be > 0"));
        }
        Ok(())
    }
}

/// Bang-bang thermostat with a latch band of `±hysteresis` around the setpoint.
pub fn thermostat(temp: f64, setpoint: f64, on: bool, hysteresis: f64) -> bool {
    if temp < setpoint - hysteresis {
        true
    } else if temp > setpoint + hysteresis {
        false
    } else {
        on
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DollHouseState {
    pub t1: f64,
    pub t2: f64,
    pub t_out: f64,
    pub heater1: bool,
    pub heater2: bool,
    pub step_index: usize,
}

impl DollHouseState {
    pub fn observation(&self) -> EnvState {
        EnvState::new(vec![
            self.t1,
            self.t2,
            self.t_out,
            self.heater1 as u8 as f64,
            self.heater2 as u8 as f64,
        ])
        .expect("checked temperatures are finite")
    }
}

#[derive(Debug, Clone)]
pub struct DollHouse {
    params: DollHouseParams,
    spec: EnvSpec,
    state: DollHouseState,
}

impl DollHouse {
    pub fn new(params: DollHouseParams) -> Result<Self> {
        params.validate()?;
        let spec = EnvSpec {
            id: DOLLHOUSE.into(),
            state_dim: 5,
            action_dim: 3,
            action_low: vec![SETPOINT_LOW, SETPOINT_LOW, 0.0],
            action_high: vec![SETPOINT_HIGH, SETPOINT_HIGH, 1.0],
            max_episode_steps: params.max_episode_steps,
            dt: params.dt,
            state_center: vec![20.0, 20.0, params.outdoor.mean, 0.5, 0.5],
            state_scale: vec![5.0, 5.0, params.outdoor.amplitude.max(1.0), 0.5, 0.5],
            equipment_indices: vec![3, 4],
        };
        spec.validate()?;
        let state = DollHouseState {
            t1: 18.0,
            t2: 18.0,
            t_out: params.outdoor.at(0),
            heater1: false,
            heater2: false,
            step_index: 0,
        };
        Ok(Self {
            params,
            spec,
            state,
        })
    }

    pub fn params(&self) -> &DollHouseParams {
        &self.params
    }

    pub fn state(&self) -> &DollHouseState {
        &self.state
    }

    pub fn set_state(&mut self, state: DollHouseState) {
        self.state = state;
    }

    /// Advances the simulator and returns the full internal state.
    pub fn advance(&mut self, action: &ActionVector) -> Result<(DollHouseState, f64, bool)> {
        check_dim("dollhouse action", 3, action.dim())?;
        let a = self.spec.clip(action)?;
        let (sp1, sp2, damper) = (a[0], a[1], a[2]);
        let p = &self.params;
        let s = &self.state;

        let heater1 = thermostat(s.t1, sp1, s.heater1, p.hysteresis);
        let heater2 = thermostat(s.t2, sp2, s.heater2, p.hysteresis);
        let h1 = heater1 as u8 as f64;
        let h2 = heater2 as u8 as f64;

        let t1 = s.t1 + p.k_out * (s.t_out - s.t1) + p.k_zone * damper * (s.t2 - s.t1) + p.k_heat * h1;
        let t2 = s.t2 + p.k_out * (s.t_out - s.t2) + p.k_zone * damper * (s.t1 - s.t2) + p.k_heat * h2;
        for t in [t1, t2] {
            if !(SANITY_LOW..=SANITY_HIGH).contains(&t) {
                return Err(Error::Diverged(format!(
                    "zone temperature {t} left [{SANITY_LOW}, {SANITY_HIGH}] degC"
                )));
            }
        }
        let step_index = s.step_index + 1;

        let discomfort = |t: f64| {
            let excess = (p.comfort_low - t).max(t - p.comfort_high).max(0.0);
            excess * excess
        };
        let reward = -p.energy_weight * (h1 + h2) - p.comfort_weight * (discomfort(t1) + discomfort(t2));

        self.state = DollHouseState {
            t1,
            t2,
            t_out: p.outdoor.at(step_index),
            heater1,
            heater2,
            step_index,
        };
        Ok((self.state.clone(), reward, step_index >= p.max_episode_steps))
    }
}

impl Environment for DollHouse {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Result<EnvState> {
        let mut rng = SeededRng::new(seed);
        self.state = DollHouseState {
            t1: rng.uniform(16.0, 20.0),
            t2: rng.uniform(16.0, 20.0),
            t_out: self.params.outdoor.at(0),
            heater1: false,
            heater2: false,
            step_index: 0,
        };
        Ok(self.state.observation())
    }

    fn step(&mut self, action: &ActionVector) -> Result<StepResult> {
        let (state, reward, done) = self.advance(action)?;
        Ok(StepResult {
            state: state.observation(),
            reward,
            done,
        })
    }
}
