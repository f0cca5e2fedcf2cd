//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any fails. Select criteria by number: `cargo test --test acceptance -- 1 3 6`.
//! Criteria 7-9 train 50 PPO runs and take several minutes.

use std::path::PathBuf;
use std::time::Instant;

use smoothrl::harness::{identify_dollhouse, run_experiment, ExperimentConfig, IdentifyConfig, ResultsTable};
use smoothrl::metrics::{jerk_std, percent_reduction, switching_count, total_variation};
use smoothrl::nn::{GaussianPolicy, Mat, MlpLayout, MlpParams};
use smoothrl::smoothing::{compute_penalty, difference_coefficients, ActionHistory, PenaltyConfig};
use smoothrl::trainer::{compute_gae, ppo_loss, Minibatch, PpoConfig};
use smoothrl::{ActionVector, SeededRng};

type Outcome = Result<String, String>;

fn av(v: Vec<f64>) -> ActionVector {
    ActionVector::new(v).unwrap()
}

fn check(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn rand_vec(rng: &mut SeededRng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.uniform(-scale, scale)).collect()
}

// ---------------------------------------------------------------- 1

fn binomial(n: u64, k: u64) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * (n + 1 - i) as f64 / i as f64)
}

fn penalty_math() -> Outcome {
    let mut rng = SeededRng::new(101);
    let mut worst = 0.0f64;
    for order in 1u8..=3 {
        let c = difference_coefficients(order);
        for (k, ck) in c.iter().enumerate() {
            let want = if k % 2 == 0 { 1.0 } else { -1.0 } * binomial(order as u64, k as u64);
            if *ck != want {
                return Err(format!("order {order} coefficient {k}: {ck} != {want}"));
            }
        }
    }
    for _ in 0..200 {
        let d = 1 + rng.below(3);
        let order = 1 + rng.below(3) as u8;
        // polynomial of degree order-1 per dimension, evaluated at t = 0..3
        let coeffs: Vec<Vec<f64>> = (0..d).map(|_| rand_vec(&mut rng, order as usize, 3.0)).collect();
        let t0 = rng.uniform(-10.0, 10.0);
        let seq: Vec<Vec<f64>> = (0..4)
            .map(|t| {
                let t = t0 + t as f64;
                coeffs.iter().map(|c| c.iter().rev().fold(0.0, |acc, k| acc * t + k)).collect()
            })
            .collect();
        let hist = ActionHistory::from_actions(av(seq[2].clone()), av(seq[1].clone()), av(seq[0].clone())).unwrap();
        let p = compute_penalty(&PenaltyConfig::new(order, 0.1).unwrap(), &av(seq[3].clone()), &hist).unwrap();
        worst = worst.max(p.abs());

        let seq: Vec<Vec<f64>> = (0..4).map(|_| rand_vec(&mut rng, d, 2.0)).collect();
        let lambda = rng.uniform(0.0, 5.0);
        let alpha = rng.uniform(-3.0, 3.0);
        let at = |lambda: f64, scale: f64| {
            let s = |v: &Vec<f64>| av(v.iter().map(|x| x * scale).collect());
            let hist = ActionHistory::from_actions(s(&seq[2]), s(&seq[1]), s(&seq[0])).unwrap();
            compute_penalty(&PenaltyConfig::new(order, lambda).unwrap(), &s(&seq[3]), &hist).unwrap()
        };
        let unit = at(1.0, 1.0);
        worst = worst.max((at(lambda, 1.0) - lambda * unit).abs());
        worst = worst.max((at(1.0, alpha) - alpha * alpha * unit).abs());
        worst = worst.max(at(0.0, 1.0));
    }
    check(worst <= 1e-12, format!("max deviation {worst:.3e} (tol 1e-12)"))
}

// ---------------------------------------------------------------- 2

fn metric_oracles() -> Outcome {
    let mut rng = SeededRng::new(202);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let len = 4 + rng.below(197);
        let d = 1 + rng.below(3);
        let seq: Vec<Vec<f64>> = (0..len).map(|_| rand_vec(&mut rng, d, 5.0)).collect();
        let actions: Vec<ActionVector> = seq.iter().cloned().map(av).collect();

        let mut jerks = Vec::new();
        for t in 3..len {
            for i in 0..d {
                jerks.push(seq[t][i] - 3.0 * seq[t - 1][i] + 3.0 * seq[t - 2][i] - seq[t - 3][i]);
            }
        }
        let n = jerks.len() as f64;
        let mean = jerks.iter().sum::<f64>() / n;
        let oracle_jerk = (jerks.iter().map(|j| j * j).sum::<f64>() / n - mean * mean).max(0.0).sqrt();
        worst = worst.max((jerk_std(&actions).unwrap() - oracle_jerk).abs());

        let mut tv = 0.0;
        for t in 1..len {
            for i in 0..d {
                tv += (seq[t][i] - seq[t - 1][i]).abs();
            }
        }
        worst = worst.max((total_variation(&actions).unwrap() - tv).abs());

        let states: Vec<Vec<bool>> = (0..len).map(|_| (0..d).map(|_| rng.uniform01() < 0.3).collect()).collect();
        let mut switches = 0u64;
        for i in 0..d {
            let mut prev = states[0][i];
            for s in &states[1..] {
                if s[i] != prev {
                    switches += 1;
                }
                prev = s[i];
            }
        }
        if switching_count(&states).unwrap() != switches {
            return Err(format!("switching_count mismatch on length {len}, d {d}"));
        }
    }
    check(worst <= 1e-10, format!("max deviation {worst:.3e} over 100 sequences (tol 1e-10)"))
}

// ---------------------------------------------------------------- 3

fn percent_arithmetic() -> Outcome {
    let a = percent_reduction(6.806, 1.443).unwrap();
    let b = percent_reduction(8.012, 1.822).unwrap();
    check(
        (a - 78.8).abs() <= 0.05 && (b - 77.3).abs() <= 0.05,
        format!("{a:.3}% (want 78.8), {b:.3}% (want 77.3)"),
    )
}

// ---------------------------------------------------------------- 4

fn gradient_check() -> Outcome {
    let mut rng = SeededRng::new(404);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let obs_dim = 1 + rng.below(6);
        let act_dim = 1 + rng.below(3);
        let hidden: Vec<usize> = (0..1 + rng.below(2)).map(|_| 2 + rng.below(15)).collect();
        let sizes = |out: usize| [vec![obs_dim], hidden.clone(), vec![out]].concat();
        let net = MlpParams::init(MlpLayout::new(sizes(act_dim)).unwrap(), 1.0, 1.0, &mut rng);
        let log_std = rand_vec(&mut rng, act_dim, 1.0);
        let policy = GaussianPolicy::new(net, log_std).unwrap();
        let value = MlpParams::init(MlpLayout::new(sizes(1)).unwrap(), 1.0, 1.0, &mut rng);
        let n = 4 + rng.below(29);
        let obs: Vec<Vec<f64>> = (0..n).map(|_| rand_vec(&mut rng, obs_dim, 1.0)).collect();
        let actions: Vec<Vec<f64>> = (0..n).map(|_| rand_vec(&mut rng, act_dim, 1.0)).collect();
        // old log-probs near the current ones spread the ratios across the clip window
        let old_log_probs = obs
            .iter()
            .zip(&actions)
            .map(|(o, a)| policy.log_prob(o, a).unwrap() + rng.uniform(-0.4, 0.4))
            .collect();
        let mb = Minibatch {
            observations: Mat::from_rows(&obs),
            actions: Mat::from_rows(&actions),
            old_log_probs,
            advantages: rand_vec(&mut rng, n, 2.0),
            returns: rand_vec(&mut rng, n, 2.0),
        };
        let config = PpoConfig {
            entropy_coef: rng.uniform(0.0, 0.1),
            ..PpoConfig::default()
        };
        let out = ppo_loss(&policy, &value, &mb, &config).unwrap();
        let p_len = policy.param_len();
        let total_len = p_len + value.flat().len();
        let loss_at = |idx: usize, delta: f64| {
            let mut pol = policy.clone();
            let mut val = value.clone();
            if idx < p_len {
                let mut flat = pol.flat();
                flat[idx] += delta;
                pol.set_flat(&flat).unwrap();
            } else {
                val.flat_mut()[idx - p_len] += delta;
            }
            ppo_loss(&pol, &val, &mb, &config).unwrap().total
        };
        for _ in 0..50 {
            let idx = rng.below(total_len);
            let analytic = if idx < p_len { out.policy_grad[idx] } else { out.value_grad[idx - p_len] };
            let h = 1e-5;
            let fd = (loss_at(idx, h) - loss_at(idx, -h)) / (2.0 * h);
            let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    check(worst < 1e-4, format!("max relative error {worst:.3e} over 10 configs x 50 coords (tol 1e-4)"))
}

// ---------------------------------------------------------------- 5

fn gae_oracle() -> Outcome {
    let mut rng = SeededRng::new(505);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = 1 + rng.below(20);
        let rewards = rand_vec(&mut rng, n, 3.0);
        let values = rand_vec(&mut rng, n, 3.0);
        let dones: Vec<bool> = (0..n).map(|_| rng.uniform01() < 0.2).collect();
        let bootstrap = rng.uniform(-3.0, 3.0);
        let gamma = rng.uniform(0.5, 1.0);
        let lambda = rng.uniform(0.0, 1.0);
        let (adv, ret) = compute_gae(&rewards, &values, &dones, bootstrap, gamma, lambda).unwrap();
        let next_v = |j: usize| if j + 1 < n { values[j + 1] } else { bootstrap };
        let delta = |j: usize| rewards[j] + gamma * if dones[j] { 0.0 } else { next_v(j) } - values[j];
        for t in 0..n {
            let mut want = 0.0;
            for k in 0..n - t {
                want += (gamma * lambda).powi(k as i32) * delta(t + k);
                if dones[t + k] {
                    break;
                }
            }
            worst = worst.max((adv[t] - want).abs()).max((ret[t] - (want + values[t])).abs());
        }
    }
    check(worst <= 1e-10, format!("max deviation {worst:.3e} over 200 batches (tol 1e-10)"))
}

// ---------------------------------------------------------------- 6

fn sindy_recovery() -> Outcome {
    let report = identify_dollhouse(&IdentifyConfig::default()).map_err(|e| e.to_string())?;
    let replay = report.replay_max_error.unwrap_or(f64::INFINITY);
    let (r, t) = (&report.recovered, &report.truth);
    let consts = (r.k_out - t.k_out).abs().max((r.k_zone - t.k_zone).abs()).max((r.k_heat - t.k_heat).abs());
    check(
        report.max_abs_error < 1e-6 && consts < 1e-6 && replay < 1e-4,
        format!(
            "coefficient max error {:.3e}, constants {consts:.3e} (tol 1e-6); {}-step replay {replay:.3e} (tol 1e-4)",
            report.max_abs_error, report.replay_steps
        ),
    )
}

// ---------------------------------------------------------------- 7-9

fn sweep(name: &str) -> Result<(ResultsTable, String), String> {
    let mut cfg = ExperimentConfig::load(config_path(name)).map_err(|e| e.to_string())?;
    cfg.jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = run_experiment(&cfg, Some(dir.path())).map_err(|e| e.to_string())?;
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).map_err(|e| e.to_string())?;
    Ok((out.table, csv))
}

fn mean_of(table: &ResultsTable, order: u8, f: fn(&smoothrl::harness::ResultsRow) -> Option<smoothrl::harness::Stat>) -> Result<f64, String> {
    let row = table.row(order).ok_or(format!("no order-{order} row"))?;
    if row.diverged > 0 {
        return Err(format!("order {order}: {} diverged runs", row.diverged));
    }
    f(row).map(|s| s.mean).ok_or(format!("order {order}: no completed runs"))
}

fn ordering(table: &ResultsTable) -> Outcome {
    let jerk = |o| mean_of(table, o, |r| r.jerk_std);
    let (j0, j1, j2, j3) = (jerk(0)?, jerk(1)?, jerk(2)?, jerk(3)?);
    let red = percent_reduction(j0, j3).map_err(|e| e.to_string())?;
    check(
        red >= 30.0 && j3 <= j2 && j2 <= j1,
        format!("jerk_std means o0 {j0:.4} o1 {j1:.4} o2 {j2:.4} o3 {j3:.4}; o3 vs o0 {red:.1}% (need >= 30 and o3 <= o2 <= o1)"),
    )
}

fn switching(table: &ResultsTable) -> Outcome {
    let (s0, s3) = (mean_of(table, 0, |r| r.switching_count)?, mean_of(table, 3, |r| r.switching_count)?);
    let (r0, r3) = (mean_of(table, 0, |r| r.return_raw)?, mean_of(table, 3, |r| r.return_raw)?);
    let red = percent_reduction(s0, s3).map_err(|e| e.to_string())?;
    let gap = 100.0 * (r3 - r0).abs() / r0.abs();
    check(
        red >= 30.0 && gap <= 20.0,
        format!(
            "switching o0 {s0:.1} o3 {s3:.1} ({red:.1}% fewer, need >= 30); raw return o0 {r0:.2} o3 {r3:.2} ({gap:.1}% apart, need <= 20)"
        ),
    )
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |k: usize| args.is_empty() || args.iter().any(|a| a == &k.to_string());
    let mut failed = 0;
    let mut report = |k: usize, name: &str, start: Instant, outcome: Outcome| {
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(m) => println!("criterion {k} PASS  {name}: {m} [{secs:.1}s]"),
            Err(m) => {
                failed += 1;
                println!("criterion {k} FAIL  {name}: {m} [{secs:.1}s]");
            }
        }
    };
    let quick: [(usize, &str, fn() -> Outcome); 6] = [
        (1, "penalty math", penalty_math),
        (2, "metric oracles", metric_oracles),
        (3, "percent reduction arithmetic", percent_arithmetic),
        (4, "gradient check", gradient_check),
        (5, "GAE oracle", gae_oracle),
        (6, "SINDy recovery", sindy_recovery),
    ];
    for (k, name, f) in quick {
        if wanted(k) {
            let t = Instant::now();
            report(k, name, t, f());
        }
    }
    if wanted(7) || wanted(9) {
        let t = Instant::now();
        let first = sweep("point_tracker.toml");
        if wanted(7) {
            report(7, "derivative-order ordering", t, first.as_ref().map_err(Clone::clone).and_then(|(tab, _)| ordering(tab)));
        }
        if wanted(9) {
            let t = Instant::now();
            let outcome = match (&first, sweep("point_tracker.toml")) {
                (Ok((_, a)), Ok((_, b))) => check(*a == b, format!("results.csv {} bytes, identical: {}", a.len(), *a == b)),
                (Err(e), _) => Err(e.clone()),
                (_, Err(e)) => Err(e),
            };
            report(9, "determinism", t, outcome);
        }
    }
    if wanted(8) {
        let t = Instant::now();
        report(8, "switching reduction", t, sweep("dollhouse.toml").and_then(|(tab, _)| switching(&tab)));
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
