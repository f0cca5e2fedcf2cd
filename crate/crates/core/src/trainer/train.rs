use serde::Serialize;

use crate::envs::{make_env, EnvParams, Environment};
use crate::error::{Error, Result};
use crate::metrics::{self, SmoothnessReport};
use crate::nn::{AdamConfig, AdamState, Checkpoint, GaussianPolicy, MlpLayout, MlpParams};
use crate::rng::SeededRng;
use crate::smoothing::{PenaltyConfig, SmoothedEnv};
use crate::types::{Trajectory, Transition};

use super::config::PpoConfig;
use super::ppo::{ppo_update, UpdateDiagnostics};
use super::rollout::{collect_rollout, ActionScaler, ObsNormalizer, RewardScaler, RolloutCursor};

/// One row of the learning curve. Smoothness columns are means over the
/// evaluation episodes at that point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub step: usize,
    pub mean_eval_return_raw: f64,
    pub mean_eval_return_shaped: f64,
    pub jerk_std: f64,
    pub switching_count: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalEpisode {
    pub trajectory: Trajectory,
    pub report: SmoothnessReport,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    pub curve: Vec<CurvePoint>,
    /// Episodes from the final evaluation.
    pub eval_episodes: Vec<EvalEpisode>,
    pub updates: Vec<UpdateDiagnostics>,
}

/// Runs the deterministic (mean-action) policy for one episode per seed.
pub fn evaluate<E: Environment>(
    env: &mut SmoothedEnv<E>,
    policy: &GaussianPolicy,
    normalizer: &ObsNormalizer,
    scaler: &ActionScaler,
    seeds: &[u64],
) -> Result<Vec<EvalEpisode>> {
    let order = env.config().order();
    let lambda = env.config().lambda();
    let env_id = env.inner_spec().id.clone();
    let mut episodes = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut obs = env.reset_augmented(seed)?;
        let mut transitions = Vec::new();
        loop {
            let state = env.current_state().cloned().expect("state after reset");
            let mu = policy.mean(&normalizer.apply(&obs))?;
            let step = env.step_shaped(&scaler.to_env(&mu)?)?;
            transitions.push(Transition::new(
                state,
                step.applied_action,
                step.env_reward,
                step.penalty,
                step.done,
            )?);
            obs = step.observation;
            if step.done {
                let trajectory = Trajectory::new(transitions, seed, env_id.clone(), order, lambda)?;
                // Only logged states count, so the report can be rebuilt from the file.
                let report = metrics::report(&trajectory, env.inner_spec(), None)?;
                episodes.push(EvalEpisode { trajectory, report });
                break;
            }
        }
    }
    Ok(episodes)
}

fn curve_point(step: usize, episodes: &[EvalEpisode]) -> CurvePoint {
    let n = episodes.len() as f64;
    let mean = |f: &dyn Fn(&SmoothnessReport) -> f64| episodes.iter().map(|e| f(&e.report)).sum::<f64>() / n;
    CurvePoint {
        step,
        mean_eval_return_raw: mean(&|r| r.episode_return_raw),
        mean_eval_return_shaped: mean(&|r| r.episode_return_shaped),
        jerk_std: mean(&|r| r.jerk_std),
        switching_count: mean(&|r| r.switching_count as f64),
    }
}

/// A single PPO run. Every random stream is forked from the run seed, so the
/// whole run is a pure function of its inputs.
pub struct Trainer {
    env: SmoothedEnv<Box<dyn Environment>>,
    env_params: EnvParams,
    config: PpoConfig,
    policy: GaussianPolicy,
    value: MlpParams,
    policy_adam: AdamState,
    value_adam: AdamState,
    normalizer: ObsNormalizer,
    scaler: ActionScaler,
    cursor: RolloutCursor,
    reward_scaler: RewardScaler,
    sample_rng: SeededRng,
    shuffle_rng: SeededRng,
    eval_seeds: Vec<u64>,
    steps: usize,
}

impl Trainer {
    pub fn new(env_id: &str, env_params: &EnvParams, penalty: PenaltyConfig, config: PpoConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let env = SmoothedEnv::new(make_env(env_id, env_params)?, penalty);
        let spec = env.spec().clone();
        let mut master = SeededRng::new(seed);
        let mut init_rng = master.fork();
        let episode_rng = master.fork();
        let sample_rng = master.fork();
        let shuffle_rng = master.fork();
        let mut eval_rng = master.fork();
        let eval_seeds = (0..config.eval_episodes).map(|_| eval_rng.next_u64()).collect();

        let policy = GaussianPolicy::init(spec.state_dim, spec.action_dim, config.init_log_std, &mut init_rng)?;
        let value = MlpParams::init(MlpLayout::standard(spec.state_dim, 1)?, 2f64.sqrt(), 1.0, &mut init_rng);
        let adam = AdamConfig {
            lr: config.learning_rate,
            ..AdamConfig::default()
        };
        Ok(Self {
            policy_adam: AdamState::new(policy.param_len(), adam),
            value_adam: AdamState::new(value.flat().len(), adam),
            normalizer: ObsNormalizer::from_spec(&spec),
            scaler: ActionScaler::from_spec(&spec),
            cursor: RolloutCursor::new(episode_rng),
            reward_scaler: RewardScaler::new(config.gamma),
            env,
            env_params: env_params.clone(),
            config,
            policy,
            value,
            sample_rng,
            shuffle_rng,
            eval_seeds,
            steps: 0,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn policy(&self) -> &GaussianPolicy {
        &self.policy
    }

    pub fn value(&self) -> &MlpParams {
        &self.value
    }

    pub fn eval_seeds(&self) -> &[u64] {
        &self.eval_seeds
    }

    /// Collects one rollout and runs one PPO update on it.
    pub fn iterate(&mut self) -> Result<UpdateDiagnostics> {
        let mut batch = collect_rollout(
            &mut self.env,
            &mut self.cursor,
            &self.policy,
            &self.value,
            &self.normalizer,
            &self.scaler,
            self.config.rollout_len,
            &mut self.sample_rng,
        )?;
        if self.config.normalize_rewards {
            let scaled = self.reward_scaler.scale(&batch.shaped_rewards, &batch.dones);
            batch.finish_with(&scaled, self.config.gamma, self.config.gae_lambda)?;
        } else {
            batch.finish(self.config.gamma, self.config.gae_lambda)?;
        }
        let diag = ppo_update(
            &mut self.policy,
            &mut self.value,
            &mut self.policy_adam,
            &mut self.value_adam,
            &batch,
            &self.config,
            &mut self.shuffle_rng,
        )?;
        if self.policy.flat().iter().chain(self.value.flat()).any(|p| !p.is_finite()) {
            return Err(Error::Diverged(format!(
                "non-finite parameters after update at step {}; {:?}",
                self.steps, diag
            )));
        }
        self.steps += self.config.rollout_len;
        Ok(diag)
    }

    /// Evaluates the current mean-action policy on the run's fixed evaluation seeds.
    /// Leaves the training episode in progress untouched.
    pub fn evaluate(&self) -> Result<Vec<EvalEpisode>> {
        let inner = make_env(&self.env.inner_spec().id, &self.env_params)?;
        let mut env = SmoothedEnv::new(inner, *self.env.config());
        evaluate(&mut env, &self.policy, &self.normalizer, &self.scaler, &self.eval_seeds)
    }

    /// Trains until the step budget is reached, evaluating every `eval_interval` steps.
    pub fn run(mut self) -> Result<TrainOutput> {
        let mut curve = Vec::new();
        let mut updates = Vec::new();
        let mut next_eval = self.config.eval_interval;
        let mut last = None;
        while self.steps < self.config.total_steps {
            updates.push(self.iterate()?);
            if self.steps >= next_eval || self.steps >= self.config.total_steps {
                let eps = self.evaluate()?;
                curve.push(curve_point(self.steps, &eps));
                last = Some(eps);
                while next_eval <= self.steps {
                    next_eval += self.config.eval_interval;
                }
            }
        }
        Ok(TrainOutput {
            checkpoint: Checkpoint {
                policy: self.policy,
                value: self.value,
            },
            curve,
            eval_episodes: last.unwrap_or_default(),
            updates,
        })
    }
}

/// Trains one policy from scratch.
pub fn train(env_id: &str, env_params: &EnvParams, penalty: PenaltyConfig, config: PpoConfig, seed: u64) -> Result<TrainOutput> {
    Trainer::new(env_id, env_params, penalty, config, seed)?.run()
}
