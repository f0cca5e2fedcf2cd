//! Smoothness and efficiency statistics over emitted action sequences.

use serde::{Deserialize, Serialize};

use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::types::{ActionVector, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    pub jerk_std: f64,
    pub total_variation: f64,
    pub switching_count: u64,
    pub episode_return_raw: f64,
    pub episode_return_shaped: f64,
}

fn check_dims(actions: &[ActionVector]) -> Result<usize> {
    let d = actions.first().map_or(0, |a| a.dim());
    if let Some(bad) = actions.iter().find(|a| a.dim() != d) {
        return Err(Error::DimensionMismatch {
            context: "action sequence",
            expected: d,
            actual: bad.dim(),
        });
    }
    Ok(d)
}

/// Population standard deviation of the third differences
/// `a_t - 3 a_{t-1} + 3 a_{t-2} - a_{t-3}`, pooled across all dimensions.
pub fn jerk_std(actions: &[ActionVector]) -> Result<f64> {
    if actions.len() < 4 {
        return Err(Error::InsufficientSamples {
            what: "third difference",
            needed: 4,
            got: actions.len(),
        });
    }
    let d = check_dims(actions)?;
    let count = (actions.len() - 3) * d;
    if count == 0 {
        return Ok(0.0);
    }
    let jerks = actions.windows(4).flat_map(|w| {
        (0..d).map(move |i| {
            let (d1, d2, d3) = (w[3][i] - w[2][i], w[2][i] - w[1][i], w[1][i] - w[0][i]);
            (d1 - d2) - (d2 - d3)
        })
    });
    // Two-pass for accuracy.
    let mean = jerks.clone().sum::<f64>() / count as f64;
    let var = jerks.map(|j| (j - mean) * (j - mean)).sum::<f64>() / count as f64;
    Ok(var.sqrt())
}

/// `sum_t || a_t - a_{t-1} ||_1`.
pub fn total_variation(actions: &[ActionVector]) -> Result<f64> {
    if actions.len() < 2 {
        return Err(Error::InsufficientSamples {
            what: "total variation",
            needed: 2,
            got: actions.len(),
        });
    }
    check_dims(actions)?;
    Ok(actions
        .windows(2)
        .map(|w| w[1].iter().zip(w[0].iter()).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .sum())
}

/// Number of (step, channel) pairs where the on/off state differs from the previous step.
pub fn switching_count(states: &[Vec<bool>]) -> Result<u64> {
    let Some(first) = states.first() else {
        return Err(Error::InsufficientSamples {
            what: "switching count",
            needed: 1,
            got: 0,
        });
    };
    let m = first.len();
    if let Some(bad) = states.iter().find(|s| s.len() != m) {
        return Err(Error::DimensionMismatch {
            context: "equipment channels",
            expected: m,
            actual: bad.len(),
        });
    }
    Ok(states
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).filter(|(a, b)| a != b).count() as u64)
        .sum())
}

/// `100 (baseline - treated) / baseline`.
pub fn percent_reduction(baseline: f64, treated: f64) -> Result<f64> {
    if !(baseline > 0.0) {
        return Err(Error::invalid(format!("baseline must be > 0, got {baseline}")));
    }
    // ratio form keeps (b, 0) -> 100 and (b, b) -> 0 exact
    Ok(100.0 * (1.0 - treated / baseline))
}

/// Mean and sample standard deviation (n - 1 denominator; 0 when n = 1).
pub fn summarize(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::InsufficientSamples {
            what: "summary",
            needed: 1,
            got: 0,
        });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok((mean, (ss / (n - 1.0)).sqrt()))
}

/// Equipment states seen over an episode: the state each action was taken
/// in, followed by the final state when one is supplied.
pub fn equipment_sequence(traj: &Trajectory, spec: &EnvSpec, final_state: Option<&[f64]>) -> Vec<Vec<bool>> {
    let mut seq: Vec<Vec<bool>> = traj.transitions.iter().map(|t| spec.equipment(&t.state)).collect();
    if let Some(s) = final_state {
        seq.push(spec.equipment(s));
    }
    seq
}

/// All smoothness statistics for one evaluation episode.
pub fn report(traj: &Trajectory, spec: &EnvSpec, final_state: Option<&[f64]>) -> Result<SmoothnessReport> {
    let actions = traj.actions();
    let switching = if spec.equipment_indices.is_empty() {
        0
    } else {
        switching_count(&equipment_sequence(traj, spec, final_state))?
    };
    Ok(SmoothnessReport {
        jerk_std: jerk_std(&actions)?,
        total_variation: total_variation(&actions)?,
        switching_count: switching,
        episode_return_raw: traj.return_raw(),
        episode_return_shaped: traj.return_shaped(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(v: &[f64]) -> Vec<ActionVector> {
        v.iter().map(|x| ActionVector::new(vec![*x]).unwrap()).collect()
    }

    #[test]
    fn jerk_of_constant_and_quadratic_is_zero() {
        assert_eq!(jerk_std(&seq(&[2.5; 5])).unwrap(), 0.0);
        let q: Vec<f64> = (0..10).map(|t| (t * t) as f64).collect();
        assert_eq!(jerk_std(&seq(&q)).unwrap(), 0.0);
    }

    #[test]
    fn jerk_of_impulse() {
        // Oracle: third differences are exactly {1, -3, 3, -1}; mean 0,
        // population variance (1 + 9 + 9 + 1) / 4 = 5.
        let j = jerk_std(&seq(&[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!((j - 5f64.sqrt()).abs() < 1e-15);
        assert!((j - 2.2360679774997896).abs() < 1e-15);
    }

    #[test]
    fn jerk_needs_four_samples() {
        let err = jerk_std(&seq(&[1.0, 2.0, 3.0])).unwrap_err();
        assert!(err.to_string().contains("insufficient samples for third difference"));
    }

    #[test]
    fn total_variation_examples() {
        assert_eq!(total_variation(&seq(&[0.0, 1.0, 0.0])).unwrap(), 2.0);
        assert_eq!(total_variation(&seq(&[3.0; 4])).unwrap(), 0.0);
        assert!(total_variation(&seq(&[1.0])).is_err());
    }

    #[test]
    fn switching_examples() {
        let s = vec![vec![true], vec![true], vec![false], vec![true]];
        assert_eq!(switching_count(&s).unwrap(), 2);
        assert_eq!(switching_count(&vec![vec![true, false]; 6]).unwrap(), 0);
        assert!(switching_count(&[vec![true], vec![true, false]]).is_err());
        assert!(switching_count(&[]).is_err());
    }

    #[test]
    fn percent_reduction_examples() {
        assert!((percent_reduction(6.806, 1.443).unwrap() - 78.8).abs() < 0.05);
        assert!((percent_reduction(8.012, 1.822).unwrap() - 77.3).abs() < 0.05);
        assert_eq!(percent_reduction(3.7, 3.7).unwrap(), 0.0);
        assert_eq!(percent_reduction(3.7, 0.0).unwrap(), 100.0);
        assert!(percent_reduction(0.0, 1.0).is_err());
    }

    #[test]
    fn summarize_examples() {
        assert_eq!(summarize(&[3.0]).unwrap(), (3.0, 0.0));
        assert_eq!(summarize(&[1.0, 1.0, 1.0]).unwrap(), (1.0, 0.0));
        // Textbook: squared deviations sum to 32 over 8 values -> sample var 32/7.
        let (m, s) = summarize(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        assert_eq!(m, 5.0);
        assert!((s - (32.0f64 / 7.0).sqrt()).abs() < 1e-14);
        assert!(summarize(&[]).is_err());
    }
}
