use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamState, GaussianPolicy, Mat, MlpParams, Tape};
use crate::rng::SeededRng;

use super::config::PpoConfig;
use super::rollout::RolloutBatch;

const POLICY: usize = 0;
const VALUE: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch {
    pub observations: Mat,
    pub actions: Mat,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Minibatch {
    pub fn gather(batch: &RolloutBatch, indices: &[usize]) -> Self {
        let rows = |v: &Vec<Vec<f64>>| Mat::from_rows(&indices.iter().map(|&i| v[i].clone()).collect::<Vec<_>>());
        let pick = |v: &Vec<f64>| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self {
            observations: rows(&batch.observations),
            actions: rows(&batch.actions),
            old_log_probs: pick(&batch.log_probs),
            advantages: pick(&batch.advantages),
            returns: pick(&batch.returns),
        }
    }

    pub fn len(&self) -> usize {
        self.old_log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.old_log_probs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub total: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub ratios: Vec<f64>,
    /// Gradient of `total` w.r.t. [`GaussianPolicy::flat`].
    pub policy_grad: Vec<f64>,
    /// Gradient of `total` w.r.t. the value network's flat parameters.
    pub value_grad: Vec<f64>,
}

/// Clipped-surrogate PPO loss and its gradients on one minibatch:
///
/// ```text
/// ratio  = exp(logp_new - logp_old)
/// L_pi   = -mean(min(ratio A, clip(ratio, 1 - eps, 1 + eps) A))
/// L_v    = mean((V - R)^2)
/// total  = L_pi + value_coef L_v - entropy_coef H
/// ```
pub fn ppo_loss(policy: &GaussianPolicy, value: &MlpParams, mb: &Minibatch, config: &PpoConfig) -> Result<LossOutput> {
    let n = mb.len();
    let mut tape = Tape::new();
    let obs = tape.constant(mb.observations.clone());
    let (logp, log_std) = policy.log_prob_tape(&mut tape, obs, &mb.actions, POLICY);
    let old = tape.constant(Mat::from_vec(n, 1, mb.old_log_probs.clone()));
    let adv = tape.constant(Mat::from_vec(n, 1, mb.advantages.clone()));
    let log_ratio = tape.sub(logp, old);
    let ratio = tape.exp(log_ratio);
    let surr1 = tape.mul(ratio, adv);
    let clipped = tape.clamp(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps);
    let surr2 = tape.mul(clipped, adv);
    let surr = tape.min(surr1, surr2);
    let surr_mean = tape.mean(surr);
    let policy_loss = tape.scale(surr_mean, -1.0);

    let v = tape.mlp(value, obs, VALUE, 0);
    let ret = tape.constant(Mat::from_vec(n, 1, mb.returns.clone()));
    let err = tape.sub(v, ret);
    let sq = tape.square(err);
    let value_loss = tape.mean(sq);

    let ls_sum = tape.sum(log_std);
    let entropy = tape.add_scalar(ls_sum, 0.5 * (1.0 + (2.0 * PI).ln()) * policy.act_dim() as f64);

    let weighted_v = tape.scale(value_loss, config.value_coef);
    let weighted_h = tape.scale(entropy, -config.entropy_coef);
    let total = tape.add(policy_loss, weighted_v);
    let total = tape.add(total, weighted_h);

    let total_value = tape.scalar(total);
    if !total_value.is_finite() {
        let (m, s) = crate::metrics::summarize(&mb.advantages).unwrap_or((f64::NAN, f64::NAN));
        return Err(Error::Diverged(format!(
            "non-finite PPO loss (policy {}, value {}); minibatch of {n}: advantage mean {m:.4e} std {s:.4e}",
            tape.scalar(policy_loss),
            tape.scalar(value_loss)
        )));
    }
    let grads = tape.backward(total)?;
    let ratios = tape.value(ratio).data.clone();
    let eps = config.clip_eps;
    let clip_fraction = ratios.iter().filter(|r| (*r - 1.0).abs() > eps).count() as f64 / n as f64;
    let approx_kl = tape
        .value(log_ratio)
        .data
        .iter()
        .map(|lr| -lr)
        .sum::<f64>()
        / n as f64;
    Ok(LossOutput {
        total: total_value,
        policy_loss: tape.scalar(policy_loss),
        value_loss: tape.scalar(value_loss),
        entropy: tape.scalar(entropy),
        clip_fraction,
        approx_kl,
        ratios,
        policy_grad: tape.param_grad(&grads, POLICY, policy.param_len()),
        value_grad: tape.param_grad(&grads, VALUE, value.flat().len()),
    })
}

/// Averages over every minibatch of the update.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct UpdateDiagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
    pub minibatches: usize,
}

/// Rescales both gradients together so their joint L2 norm is at most
/// `max_norm`; returns the norm before clipping.
pub fn clip_grad_norm(policy_grad: &mut [f64], value_grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = policy_grad.iter().chain(value_grad.iter()).map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let k = max_norm / norm;
        policy_grad.iter_mut().chain(value_grad.iter_mut()).for_each(|g| *g *= k);
    }
    norm
}

/// `epochs` passes of shuffled minibatches with joint gradient-norm clipping
/// and Adam steps on both networks.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update(
    policy: &mut GaussianPolicy,
    value: &mut MlpParams,
    policy_adam: &mut AdamState,
    value_adam: &mut AdamState,
    batch: &RolloutBatch,
    config: &PpoConfig,
    rng: &mut SeededRng,
) -> Result<UpdateDiagnostics> {
    let n = batch.len();
    let mut diag = UpdateDiagnostics::default();
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..config.epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(config.minibatch_size) {
            let mb = Minibatch::gather(batch, chunk);
            let out = ppo_loss(policy, value, &mb, config)?;
            let (mut pg, mut vg) = (out.policy_grad, out.value_grad);
            let norm = clip_grad_norm(&mut pg, &mut vg, config.max_grad_norm);

            let mut pflat = policy.flat();
            adam_step(policy_adam, &mut pflat, &pg)?;
            policy.set_flat(&pflat)?;
            adam_step(value_adam, value.flat_mut(), &vg)?;
            if value.flat().iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged("value network parameters became non-finite".into()));
            }

            diag.policy_loss += out.policy_loss;
            diag.value_loss += out.value_loss;
            diag.entropy += out.entropy;
            diag.clip_fraction += out.clip_fraction;
            diag.approx_kl += out.approx_kl;
            diag.grad_norm += norm;
            diag.minibatches += 1;
        }
    }
    if diag.minibatches > 0 {
        let k = diag.minibatches as f64;
        diag.policy_loss /= k;
        diag.value_loss /= k;
        diag.entropy /= k;
        diag.clip_fraction /= k;
        diag.approx_kl /= k;
        diag.grad_norm /= k;
    }
    Ok(diag)
}
