use serde::{Deserialize, Serialize};

use crate::envs::{thermostat, DollHouse, DollHouseParams, Environment, DOLLHOUSE};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::sysid::{
    build_design_matrix, dollhouse_true_coefficients, read_dollhouse_coefficients, simulate_identified_with, stlsq,
    CandidateLibrary, CoefficientMatrix, ThermalCoefficients, DEFAULT_MAX_ITERS, DEFAULT_THRESHOLD,
};
use crate::types::{ActionVector, Trajectory, Transition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentifyConfig {
    pub params: DollHouseParams,
    /// Random-policy episodes to log.
    pub episodes: usize,
    pub seed: u64,
    pub threshold: f64,
    pub max_iters: usize,
    /// Length of the open-loop replay check.
    pub replay_steps: usize,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        Self {
            params: DollHouseParams::default(),
            episodes: 10,
            seed: 0,
            threshold: DEFAULT_THRESHOLD,
            max_iters: DEFAULT_MAX_ITERS,
            replay_steps: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub term: String,
    pub target: String,
    pub recovered: f64,
    pub truth: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentifyReport {
    pub samples: usize,
    pub threshold: f64,
    pub iterations: usize,
    pub converged: bool,
    pub recovered: ThermalCoefficients,
    pub truth: ThermalCoefficients,
    /// Max-norm distance between the recovered and the simulator coefficient matrices.
    pub max_abs_error: f64,
    /// Worst per-step state error of the identified model replayed open loop
    /// against the first log; `None` when the model could not be replayed.
    pub replay_max_error: Option<f64>,
    pub replay_steps: usize,
    /// Every term that is non-zero in either matrix.
    pub coefficients: Vec<CoefficientRow>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub model: CoefficientMatrix,
    #[serde(skip)]
    pub library: CandidateLibrary,
}

/// Logs `episodes` DollHouse episodes under uniformly random actions.
pub fn random_policy_logs(params: &DollHouseParams, episodes: usize, seed: u64) -> Result<Vec<Trajectory>> {
    let mut env = DollHouse::new(params.clone())?;
    let mut rng = SeededRng::new(seed);
    let (lo, hi) = (env.spec().action_low.clone(), env.spec().action_high.clone());
    let mut logs = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let ep_seed = rng.next_u64();
        let mut state = env.reset(ep_seed)?;
        let mut transitions = Vec::new();
        loop {
            let a = ActionVector::new(lo.iter().zip(&hi).map(|(l, h)| rng.uniform(*l, *h)).collect())?;
            let step = env.step(&a)?;
            transitions.push(Transition::new(state, a, step.reward, 0.0, step.done)?);
            state = step.state;
            if step.done {
                break;
            }
        }
        logs.push(Trajectory::new(transitions, ep_seed, DOLLHOUSE, 0, 0.0)?);
    }
    Ok(logs)
}

/// Identifies the DollHouse zone dynamics from `logs` and scores the result
/// against the simulator constants in `config.params`.
pub fn identify_from_logs(logs: &[Trajectory], config: &IdentifyConfig) -> Result<IdentifyReport> {
    let params = &config.params;
    let library = CandidateLibrary::dollhouse(params.hysteresis)?;
    let design = build_design_matrix(logs, &library)?;
    let model = stlsq(&design.theta, &design.targets, config.threshold, config.max_iters)?;
    let truth_xi = dollhouse_true_coefficients(params, &library)?;

    let mut warnings = Vec::new();
    if model.nonzero_count() == 0 {
        warnings.push(format!(
            "identified model is empty: threshold {} exceeds every coefficient",
            config.threshold
        ));
    }
    if !model.converged {
        warnings.push(format!("STLSQ stopped after {} iterations without a stable support", model.iterations));
    }
    let max_abs_error = (&model.xi - &truth_xi).amax();
    let mut coefficients = Vec::new();
    for (c, target) in library.target_names().iter().enumerate() {
        for (r, term) in library.terms().iter().enumerate() {
            let (got, want) = (model.xi[(r, c)], truth_xi[(r, c)]);
            if got != 0.0 || want != 0.0 {
                coefficients.push(CoefficientRow {
                    term: term.name.clone(),
                    target: target.clone(),
                    recovered: got,
                    truth: want,
                });
            }
        }
    }

    let replay_steps = config.replay_steps.min(logs[0].len() - 1);
    let replay_max_error = match replay(&model, &library, params, &logs[0], replay_steps) {
        Ok(e) => Some(e),
        Err(Error::Diverged(msg)) => {
            warnings.push(format!("replay diverged: {msg}"));
            None
        }
        Err(e) => return Err(e),
    };
    let recovered = read_dollhouse_coefficients(&model, &library)?;
    Ok(IdentifyReport {
        samples: design.theta.nrows(),
        threshold: config.threshold,
        iterations: model.iterations,
        converged: model.converged,
        recovered,
        truth: ThermalCoefficients {
            k_out: params.k_out,
            k_zone: params.k_zone,
            k_heat: params.k_heat,
        },
        max_abs_error,
        replay_max_error,
        replay_steps,
        coefficients,
        warnings,
        model,
        library,
    })
}

/// Open-loop replay: zone temperatures come from the model, the outdoor
/// temperature and the thermostat latch from their known mechanisms.
fn replay(
    model: &CoefficientMatrix,
    library: &CandidateLibrary,
    params: &DollHouseParams,
    log: &Trajectory,
    steps: usize,
) -> Result<f64> {
    let actions: Vec<ActionVector> = log.transitions[..steps].iter().map(|t| t.action.clone()).collect();
    let start = log.transitions[0].state.as_slice();
    let h = params.hysteresis;
    let predicted = simulate_identified_with(model, library, start, &actions, |k, prev, a, next| {
        next[2] = params.outdoor.at(k + 1);
        next[3] = thermostat(prev[0], a[0], prev[3] > 0.5, h) as u8 as f64;
        next[4] = thermostat(prev[1], a[1], prev[4] > 0.5, h) as u8 as f64;
    })?;
    let mut worst: f64 = 0.0;
    for k in 1..=steps {
        let logged = log.transitions[k].state.as_slice();
        for (p, l) in predicted[k].iter().zip(logged) {
            worst = worst.max((p - l).abs());
        }
    }
    Ok(worst)
}

/// Generates random-policy logs and identifies the model from them.
pub fn identify_dollhouse(config: &IdentifyConfig) -> Result<IdentifyReport> {
    let logs = random_policy_logs(&config.params, config.episodes, config.seed)?;
    identify_from_logs(&logs, config)
}
