use std::f64::consts::PI;

use crate::error::{check_dim, check_finite, Result};
use crate::rng::SeededRng;

use super::mat::Mat;
use super::mlp::{MlpLayout, MlpParams};
use super::tape::{Tape, Var};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Diagonal Gaussian with an MLP mean and a state-independent log-std.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub mean_net: MlpParams,
    log_std: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new(mean_net: MlpParams, log_std: Vec<f64>) -> Result<Self> {
        check_dim("log_std", mean_net.layout().out_dim(), log_std.len())?;
        check_finite("log_std", &log_std)?;
        let log_std = log_std.into_iter().map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect();
        Ok(Self { mean_net, log_std })
    }

    /// Standard 2x64 tanh mean network; the output layer starts near zero (gain 0.01).
    pub fn init(obs_dim: usize, act_dim: usize, init_log_std: f64, rng: &mut SeededRng) -> Result<Self> {
        let layout = MlpLayout::standard(obs_dim, act_dim)?;
        let net = MlpParams::init(layout, 2f64.sqrt(), 0.01, rng);
        Self::new(net, vec![init_log_std; act_dim])
    }

    pub fn obs_dim(&self) -> usize {
        self.mean_net.layout().in_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    pub fn mean(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.mean_net.forward(obs)
    }

    /// Diagonal-Gaussian log density of `action` at `obs`.
    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        check_dim("log_prob action", self.act_dim(), action.len())?;
        let mu = self.mean(obs)?;
        Ok(self.log_prob_given_mean(&mu, action))
    }

    pub(crate) fn log_prob_given_mean(&self, mu: &[f64], action: &[f64]) -> f64 {
        mu.iter()
            .zip(action)
            .zip(&self.log_std)
            .map(|((m, a), ls)| {
                let z = (a - m) * (-ls).exp();
                -0.5 * z * z - ls - HALF_LN_2PI
            })
            .sum()
    }

    /// Draws an action; returns it with its log density.
    pub fn sample(&self, obs: &[f64], rng: &mut SeededRng) -> Result<(Vec<f64>, f64)> {
        let mu = self.mean(obs)?;
        let action: Vec<f64> = mu
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| m + ls.exp() * rng.normal())
            .collect();
        let lp = self.log_prob_given_mean(&mu, &action);
        Ok((action, lp))
    }

    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| ls + 0.5 * (1.0 + (2.0 * PI).ln())).sum()
    }

    /// Mean-net parameters followed by `log_std`.
    pub fn param_len(&self) -> usize {
        self.mean_net.flat().len() + self.log_std.len()
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.mean_net.flat().to_vec();
        v.extend_from_slice(&self.log_std);
        v
    }

    /// Overwrites all parameters from a flat vector, re-applying the log-std clamp.
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        check_dim("policy parameter vector", self.param_len(), flat.len())?;
        check_finite("policy parameters", flat)?;
        let n = self.mean_net.flat().len();
        self.mean_net.flat_mut().copy_from_slice(&flat[..n]);
        for (dst, src) in self.log_std.iter_mut().zip(&flat[n..]) {
            *dst = src.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
        Ok(())
    }

    /// Records batched log densities (`n x 1`) and the log-std leaf on `tape`.
    pub fn log_prob_tape(&self, tape: &mut Tape, obs: Var, actions: &Mat, group: usize) -> (Var, Var) {
        let n = actions.rows;
        let mu = tape.mlp(&self.mean_net, obs, group, 0);
        let ls = tape.param(
            Mat::from_vec(1, self.act_dim(), self.log_std.clone()),
            group,
            self.mean_net.flat().len(),
        );
        let a = tape.constant(actions.clone());
        let diff = tape.sub(a, mu);
        let neg_ls = tape.scale(ls, -1.0);
        let inv_std = tape.exp(neg_ls);
        let inv_std = tape.broadcast_rows(inv_std, n);
        let z = tape.mul(diff, inv_std);
        let z2 = tape.square(z);
        let quad = tape.sum_cols(z2);
        let quad = tape.scale(quad, -0.5);
        let ls_rows = tape.broadcast_rows(ls, n);
        let ls_sum = tape.sum_cols(ls_rows);
        let lp = tape.sub(quad, ls_sum);
        let lp = tape.add_scalar(lp, -HALF_LN_2PI * self.act_dim() as f64);
        (lp, ls)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy_with_zero_mean(d: usize, log_std: f64) -> GaussianPolicy {
        let layout = MlpLayout::new(vec![1, d]).unwrap();
        GaussianPolicy::new(MlpParams::zeros(layout), vec![log_std; d]).unwrap()
    }

    #[test]
    fn density_at_mode() {
        let p = policy_with_zero_mean(1, 0.0);
        let lp = p.log_prob(&[0.3], &[0.0]).unwrap();
        assert!((lp - (-0.5 * (2.0 * PI).ln())).abs() < 1e-15);
    }

    #[test]
    fn density_one_sigma_away() {
        let p = policy_with_zero_mean(1, 0.0);
        let lp = p.log_prob(&[0.3], &[1.0]).unwrap();
        assert!((lp - (-0.5 - 0.5 * (2.0 * PI).ln())).abs() < 1e-15);
    }

    #[test]
    fn random_density_matches_formula() {
        let mut rng = SeededRng::new(8);
        let p = GaussianPolicy::init(4, 3, -0.3, &mut rng).unwrap();
        let obs = [0.1, -0.4, 0.9, 0.2];
        let act = [0.5, -1.5, 0.05];
        let mu = p.mean(&obs).unwrap();
        let sigma = (-0.3f64).exp();
        let mut expect = 0.0;
        for i in 0..3 {
            let pdf = (-(act[i] - mu[i]).powi(2) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt());
            expect += pdf.ln();
        }
        assert!((p.log_prob(&obs, &act).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn log_std_is_clamped() {
        let p = policy_with_zero_mean(2, 10.0);
        assert_eq!(p.log_std(), &[LOG_STD_MAX, LOG_STD_MAX]);
        let mut q = policy_with_zero_mean(1, 0.0);
        let mut flat = q.flat();
        *flat.last_mut().unwrap() = -30.0;
        q.set_flat(&flat).unwrap();
        assert_eq!(q.log_std(), &[LOG_STD_MIN]);
    }

    #[test]
    fn tape_log_prob_matches_direct() {
        let mut rng = SeededRng::new(4);
        let p = GaussianPolicy::init(3, 2, 0.2, &mut rng).unwrap();
        let obs = Mat::from_rows(&[vec![0.1, 0.2, 0.3], vec![-1.0, 0.5, 0.0]]);
        let acts = Mat::from_rows(&[vec![0.4, -0.2], vec![1.0, 2.0]]);
        let mut tape = Tape::new();
        let o = tape.constant(obs.clone());
        let (lp, _) = p.log_prob_tape(&mut tape, o, &acts, 0);
        for r in 0..2 {
            let direct = p.log_prob(obs.row(r), acts.row(r)).unwrap();
            assert!((tape.value(lp).data[r] - direct).abs() < 1e-12);
        }
    }

    #[test]
    #[ignore = "slow Monte Carlo sanity check"]
    fn density_integrates_to_one() {
        // E_{x ~ U(-10, 10)}[p(x)] * 20 over 1e6 uniform samples.
        let p = policy_with_zero_mean(1, 0.0);
        let mut rng = SeededRng::new(1);
        let n = 1_000_000;
        let total: f64 = (0..n)
            .map(|_| p.log_prob(&[0.0], &[rng.uniform(-10.0, 10.0)]).unwrap().exp())
            .sum();
        let integral = total / n as f64 * 20.0;
        assert!((integral - 1.0).abs() < 0.01, "{integral}");
    }
}
