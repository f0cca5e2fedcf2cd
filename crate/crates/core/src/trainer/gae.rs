use crate::error::{check_dim, Result};

/// Generalized advantage estimation.
///
/// `delta_t = r_t + gamma (1 - done_t) V_{t+1} - V_t` with `V_T = bootstrap`,
/// `A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}`; returns are `A + V`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    check_dim("gae values", n, values.len())?;
    check_dim("gae dones", n, dones.len())?;
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap_value;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * live * next_value - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Rescales to zero mean and unit population std; constant inputs become all zeros.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    adv.iter_mut().for_each(|a| *a -= mean);
    let std = (adv.iter().map(|a| a * a).sum::<f64>() / n).sqrt();
    if std > 0.0 {
        adv.iter_mut().for_each(|a| *a /= std);
        // One correction pass cleans up rounding in the mean.
        let m2 = adv.iter().sum::<f64>() / n;
        adv.iter_mut().for_each(|a| *a -= m2);
    }
}
