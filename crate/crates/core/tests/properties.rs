use proptest::prelude::*;
use smoothrl::metrics::{jerk_std, percent_reduction, switching_count, total_variation};
use smoothrl::smoothing::{compute_penalty, difference_coefficients, ActionHistory, PenaltyConfig};
use smoothrl::trajectory::{load_trajectory, save_trajectory};
use smoothrl::{ActionVector, EnvState, Trajectory, Transition};

fn av(v: Vec<f64>) -> ActionVector {
    ActionVector::new(v).unwrap()
}

/// Penalty for emitting `seq[3]` after `seq[2], seq[1], seq[0]`.
fn penalty_at(order: u8, lambda: f64, seq: &[Vec<f64>]) -> f64 {
    let hist = ActionHistory::from_actions(av(seq[2].clone()), av(seq[1].clone()), av(seq[0].clone())).unwrap();
    compute_penalty(&PenaltyConfig::new(order, lambda).unwrap(), &av(seq[3].clone()), &hist).unwrap()
}

fn poly_seq(coeffs: &[Vec<f64>], len: usize) -> Vec<Vec<f64>> {
    (0..len)
        .map(|t| {
            let t = t as f64;
            coeffs.iter().map(|c| c.iter().rev().fold(0.0, |acc, k| acc * t + k)).collect()
        })
        .collect()
}

fn dims() -> impl Strategy<Value = usize> {
    1usize..=3
}

proptest! {
    #[test]
    fn polynomial_of_degree_below_order_is_free(
        d in dims(),
        order in 1u8..=3,
        raw in prop::collection::vec(-5.0f64..5.0, 12),
    ) {
        // small integer-valued coefficients keep every difference exact
        let coeffs: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..order as usize).map(|k| raw[i * 4 + k].round()).collect())
            .collect();
        let seq = poly_seq(&coeffs, 4);
        prop_assert_eq!(penalty_at(order, 0.1, &seq), 0.0);
    }

    #[test]
    fn penalty_is_linear_in_lambda(
        seq in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 4),
        lambda in 0.0f64..10.0,
        order in 1u8..=3,
    ) {
        let unit = penalty_at(order, 1.0, &seq);
        let scaled = penalty_at(order, lambda, &seq);
        prop_assert!((scaled - lambda * unit).abs() <= 1e-12 * (1.0 + scaled.abs()));
    }

    #[test]
    fn penalty_is_quadratic_in_actions(
        seq in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 4),
        alpha in -4.0f64..4.0,
        order in 1u8..=3,
    ) {
        let scaled: Vec<Vec<f64>> = seq.iter().map(|a| a.iter().map(|x| alpha * x).collect()).collect();
        let p = penalty_at(order, 0.1, &seq);
        let q = penalty_at(order, 0.1, &scaled);
        prop_assert!((q - alpha * alpha * p).abs() <= 1e-12 * (1.0 + q.abs()));
    }

    #[test]
    fn jerk_ignores_added_quadratics(
        base in prop::collection::vec(-2.0f64..2.0, 4..60),
        c in prop::collection::vec(-3.0f64..3.0, 3),
    ) {
        let seq: Vec<ActionVector> = base.iter().map(|x| av(vec![*x])).collect();
        let shifted: Vec<ActionVector> = base
            .iter()
            .enumerate()
            .map(|(t, x)| {
                let t = t as f64;
                av(vec![x + c[0] + c[1] * t + c[2] * t * t])
            })
            .collect();
        let a = jerk_std(&seq).unwrap();
        let b = jerk_std(&shifted).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * (1.0 + a), "{} vs {}", a, b);
    }

    #[test]
    fn jerk_scales_linearly(
        base in prop::collection::vec(-2.0f64..2.0, 8..60),
        alpha in 0.01f64..10.0,
    ) {
        let seq: Vec<ActionVector> = base.chunks(2).filter(|c| c.len() == 2).map(|c| av(c.to_vec())).collect();
        prop_assume!(seq.len() >= 4);
        let scaled: Vec<ActionVector> = seq.iter().map(|a| av(a.iter().map(|x| alpha * x).collect())).collect();
        let a = jerk_std(&seq).unwrap();
        prop_assert!((jerk_std(&scaled).unwrap() - alpha * a).abs() <= 1e-12 * (1.0 + alpha * a));
        prop_assert!(total_variation(&scaled).unwrap() >= 0.0);
    }

    #[test]
    fn switching_ignores_global_negation(
        states in prop::collection::vec(prop::collection::vec(any::<bool>(), 3), 1..80),
    ) {
        let flipped: Vec<Vec<bool>> = states.iter().map(|s| s.iter().map(|b| !b).collect()).collect();
        prop_assert_eq!(switching_count(&states).unwrap(), switching_count(&flipped).unwrap());
    }

    #[test]
    fn full_reduction_is_one_hundred(b in 1e-6f64..1e6) {
        prop_assert_eq!(percent_reduction(b, 0.0).unwrap(), 100.0);
    }

    #[test]
    fn file_round_trip_preserves_metrics(
        actions in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 2), 4..40),
        rewards in prop::collection::vec(-10.0f64..10.0, 40),
        lambda in 0.0f64..1.0,
    ) {
        let n = actions.len();
        let transitions: Vec<Transition> = actions
            .iter()
            .enumerate()
            .map(|(t, a)| {
                Transition::new(
                    EnvState::new(vec![t as f64 / 3.0, rewards[t]]).unwrap(),
                    av(a.clone()),
                    rewards[t],
                    (rewards[t] * 0.37).abs(),
                    t + 1 == n,
                )
                .unwrap()
            })
            .collect();
        let traj = Trajectory::new(transitions, 99, "point_tracker", 2, lambda).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.traj");
        save_trajectory(&traj, &path).unwrap();
        let back = load_trajectory(&path).unwrap();
        prop_assert_eq!(&back, &traj);
        prop_assert_eq!(jerk_std(&back.actions()).unwrap().to_bits(), jerk_std(&traj.actions()).unwrap().to_bits());
        prop_assert_eq!(back.return_shaped().to_bits(), traj.return_shaped().to_bits());
    }
}

#[test]
fn coefficients_are_alternating_binomials() {
    assert_eq!(difference_coefficients(0), &[] as &[f64]);
    assert_eq!(difference_coefficients(1), &[1.0, -1.0]);
    assert_eq!(difference_coefficients(2), &[1.0, -2.0, 1.0]);
    assert_eq!(difference_coefficients(3), &[1.0, -3.0, 3.0, -1.0]);
}
