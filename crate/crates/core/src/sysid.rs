//! Sparse identification of discrete-time dynamics (SINDy) by sequentially
//! thresholded least squares.
//!
//! A [`CandidateLibrary`] maps a `(state, action)` pair to a row of basis
//! function values. Targets are one-step differences `s_{k+1} - s_k` of the
//! tracked state entries, so the identified model is
//! `s_{k+1} = s_k + Theta(s_k, a_k) xi`.
//!
//! Known actuator mechanisms (the DollHouse thermostat latch) enter the
//! library as derived variables rather than being identified.

use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::envs::DollHouseParams;
use crate::error::{check_dim, Error, Result};
use crate::fmt_f64;
use crate::types::{ActionVector, Trajectory};

/// Gram-matrix condition number above which the normal equations are abandoned.
pub const NORMAL_EQUATIONS_MAX_COND: f64 = 1e8;
pub const DEFAULT_THRESHOLD: f64 = 0.01;
pub const DEFAULT_MAX_ITERS: usize = 20;
const SANITY_BOUND: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub enum VariableSource {
    State(usize),
    Action(usize),
    /// Heater state after a hysteretic thermostat update:
    /// `thermostat(state[temp], action[setpoint], state[latch] > 0.5, hysteresis)`.
    Thermostat {
        temp: usize,
        setpoint: usize,
        latch: usize,
        hysteresis: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub source: VariableSource,
    /// 0/1-valued; its square duplicates the linear term and is left out.
    pub boolean: bool,
}

impl Variable {
    pub fn state(name: impl Into<String>, index: usize) -> Self {
        Self {
            name: name.into(),
            source: VariableSource::State(index),
            boolean: false,
        }
    }

    pub fn action(name: impl Into<String>, index: usize) -> Self {
        Self {
            name: name.into(),
            source: VariableSource::Action(index),
            boolean: false,
        }
    }

    fn eval(&self, state: &[f64], action: &[f64]) -> f64 {
        match self.source {
            VariableSource::State(i) => state[i],
            VariableSource::Action(i) => action[i],
            VariableSource::Thermostat {
                temp,
                setpoint,
                latch,
                hysteresis,
            } => {
                let on = crate::envs::thermostat(state[temp], action[setpoint], state[latch] > 0.5, hysteresis);
                on as u8 as f64
            }
        }
    }

    fn max_state_index(&self) -> Option<usize> {
        match self.source {
            VariableSource::State(i) => Some(i),
            VariableSource::Action(_) => None,
            VariableSource::Thermostat { temp, latch, .. } => Some(temp.max(latch)),
        }
    }

    fn max_action_index(&self) -> Option<usize> {
        match self.source {
            VariableSource::State(_) => None,
            VariableSource::Action(i) => Some(i),
            VariableSource::Thermostat { setpoint, .. } => Some(setpoint),
        }
    }
}

/// A monomial of degree 0, 1 or 2 in the library variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub name: String,
    pub factors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateLibrary {
    variables: Vec<Variable>,
    terms: Vec<Term>,
    /// State indices whose one-step differences are regressed.
    targets: Vec<usize>,
    target_names: Vec<String>,
}

impl CandidateLibrary {
    /// Constant, every variable, all state x action products and all state x
    /// state products (including squares of non-boolean variables).
    pub fn polynomial(
        state_vars: Vec<Variable>,
        action_vars: Vec<Variable>,
        targets: Vec<usize>,
        target_names: Vec<String>,
    ) -> Result<Self> {
        let ns = state_vars.len();
        let variables: Vec<Variable> = state_vars.into_iter().chain(action_vars).collect();
        let mut terms = vec![Term {
            name: "1".into(),
            factors: vec![],
        }];
        for (i, v) in variables.iter().enumerate() {
            terms.push(Term {
                name: v.name.clone(),
                factors: vec![i],
            });
        }
        for i in 0..ns {
            for j in ns..variables.len() {
                terms.push(Term {
                    name: format!("{}*{}", variables[i].name, variables[j].name),
                    factors: vec![i, j],
                });
            }
        }
        for i in 0..ns {
            for j in i..ns {
                if i == j && variables[i].boolean {
                    continue;
                }
                terms.push(Term {
                    name: format!("{}*{}", variables[i].name, variables[j].name),
                    factors: vec![i, j],
                });
            }
        }
        Self::from_terms(variables, terms, targets, target_names)
    }

    pub fn from_terms(
        variables: Vec<Variable>,
        terms: Vec<Term>,
        targets: Vec<usize>,
        target_names: Vec<String>,
    ) -> Result<Self> {
        check_dim("target names", targets.len(), target_names.len())?;
        let mut names: Vec<&str> = terms.iter().map(|t| t.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("duplicate library term {:?}", w[0])));
        }
        if terms.iter().flat_map(|t| &t.factors).any(|&f| f >= variables.len()) {
            return Err(Error::invalid("library term references an unknown variable"));
        }
        Ok(Self {
            variables,
            terms,
            targets,
            target_names,
        })
    }

    /// Generic library over raw state `x0..` and action `u0..`, all states tracked.
    pub fn for_dims(state_dim: usize, action_dim: usize) -> Result<Self> {
        let sv = (0..state_dim).map(|i| Variable::state(format!("x{i}"), i)).collect();
        let av = (0..action_dim).map(|i| Variable::action(format!("u{i}"), i)).collect();
        let targets: Vec<usize> = (0..state_dim).collect();
        let names = (0..state_dim).map(|i| format!("x{i}")).collect();
        Self::polynomial(sv, av, targets, names)
    }

    /// Library for the DollHouse observation `[T1, T2, T_out, heater1, heater2]`
    /// and action `[sp1, sp2, damper]`. Heater regressors are the states the
    /// thermostat applies during the step; zone temperatures are the targets.
    pub fn dollhouse(hysteresis: f64) -> Result<Self> {
        let heater = |name: &str, zone: usize| Variable {
            name: name.into(),
            source: VariableSource::Thermostat {
                temp: zone,
                setpoint: zone,
                latch: 3 + zone,
                hysteresis,
            },
            boolean: true,
        };
        let state_vars = vec![
            Variable::state("T1", 0),
            Variable::state("T2", 1),
            Variable::state("T_out", 2),
            heater("heater1", 0),
            heater("heater2", 1),
        ];
        let action_vars = vec![
            Variable::action("sp1", 0),
            Variable::action("sp2", 1),
            Variable::action("damper", 2),
        ];
        Self::polynomial(state_vars, action_vars, vec![0, 1], vec!["T1".into(), "T2".into()])
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn term_index(&self, name: &str) -> Option<usize> {
        self.terms.iter().position(|t| t.name == name)
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn target_names(&self) -> &[String] {
        &self.target_names
    }

    fn check_inputs(&self, state_dim: usize, action_dim: usize) -> Result<()> {
        let need_s = self
            .variables
            .iter()
            .filter_map(Variable::max_state_index)
            .chain(self.targets.iter().copied())
            .max()
            .map_or(0, |m| m + 1);
        let need_a = self
            .variables
            .iter()
            .filter_map(Variable::max_action_index)
            .max()
            .map_or(0, |m| m + 1);
        if state_dim < need_s {
            return Err(Error::DimensionMismatch {
                context: "library state dimension",
                expected: need_s,
                actual: state_dim,
            });
        }
        if action_dim < need_a {
            return Err(Error::DimensionMismatch {
                context: "library action dimension",
                expected: need_a,
                actual: action_dim,
            });
        }
        Ok(())
    }

    /// Values of every term at `(state, action)`.
    pub fn eval(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        self.check_inputs(state.len(), action.len())?;
        Ok(self.eval_unchecked(state, action))
    }

    fn eval_unchecked(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        let vars: Vec<f64> = self.variables.iter().map(|v| v.eval(state, action)).collect();
        self.terms
            .iter()
            .map(|t| t.factors.iter().map(|&f| vars[f]).product())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct DesignMatrix {
    /// `N x p` library evaluations.
    pub theta: DMatrix<f64>,
    /// `N x n` one-step differences of the tracked state entries.
    pub targets: DMatrix<f64>,
}

/// Stacks consecutive transition pairs of every trajectory into a regression problem.
pub fn build_design_matrix(trajectories: &[Trajectory], library: &CandidateLibrary) -> Result<DesignMatrix> {
    let p = library.len();
    if let Some(first) = trajectories.first() {
        if let Some(other) = trajectories.iter().find(|t| t.env_id != first.env_id) {
            return Err(Error::invalid(format!(
                "trajectories from different environments: {} vs {}",
                first.env_id, other.env_id
            )));
        }
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut diffs: Vec<Vec<f64>> = Vec::new();
    for traj in trajectories {
        for pair in traj.transitions.windows(2) {
            let (cur, next) = (&pair[0], &pair[1]);
            check_dim("design matrix state", cur.state.dim(), next.state.dim())?;
            library.check_inputs(cur.state.dim(), cur.action.dim())?;
            rows.push(library.eval_unchecked(&cur.state, &cur.action));
            diffs.push(library.targets.iter().map(|&i| next.state[i] - cur.state[i]).collect());
        }
    }
    if rows.len() < p + 1 {
        return Err(Error::InsufficientSamples {
            what: "design matrix",
            needed: p + 1,
            got: rows.len(),
        });
    }
    let n = library.targets.len();
    let theta = DMatrix::from_fn(rows.len(), p, |r, c| rows[r][c]);
    let targets = DMatrix::from_fn(diffs.len(), n, |r, c| diffs[r][c]);
    Ok(DesignMatrix { theta, targets })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    /// `p x n`: one column per tracked state entry.
    pub xi: DMatrix<f64>,
    pub threshold_used: f64,
    /// Largest number of least-squares solves over all target columns.
    pub iterations: usize,
    /// False if some column hit `max_iters` before its support stopped changing.
    pub converged: bool,
    /// Active-set size after each iteration, per target column.
    pub support_history: Vec<Vec<usize>>,
}

impl CoefficientMatrix {
    pub fn zeros(p: usize, n: usize) -> Self {
        Self {
            xi: DMatrix::zeros(p, n),
            threshold_used: 0.0,
            iterations: 0,
            converged: true,
            support_history: vec![vec![]; n],
        }
    }

    pub fn nonzero_count(&self) -> usize {
        self.xi.iter().filter(|v| **v != 0.0).count()
    }

    /// Boolean support mask, `p x n`.
    pub fn support(&self) -> Vec<Vec<bool>> {
        (0..self.xi.ncols())
            .map(|c| (0..self.xi.nrows()).map(|r| self.xi[(r, c)] != 0.0).collect())
            .collect()
    }
}

/// Least squares restricted to `active` columns of `theta`.
///
/// Columns are scaled to unit norm first. The normal equations are used
/// when the scaled Gram matrix has condition number at most
/// [`NORMAL_EQUATIONS_MAX_COND`]; otherwise an SVD of the scaled columns
/// solves the system and detects rank deficiency.
pub fn least_squares(theta: &DMatrix<f64>, y: &DVector<f64>, active: &[usize]) -> Result<DVector<f64>> {
    let k = active.len();
    if k == 0 {
        return Ok(DVector::zeros(0));
    }
    let n = theta.nrows();
    let mut a = DMatrix::zeros(n, k);
    let mut scale = vec![0.0; k];
    for (j, &c) in active.iter().enumerate() {
        let col = theta.column(c);
        let norm = col.norm();
        if norm == 0.0 {
            return Err(Error::RankDeficient { active: k, rank: k - 1 });
        }
        scale[j] = norm;
        a.set_column(j, &(col / norm));
    }
    let gram = a.tr_mul(&a);
    let rhs = a.tr_mul(y);
    let eig = SymmetricEigen::new(gram.clone());
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    let solution = if lmin > 0.0 && lmax / lmin <= NORMAL_EQUATIONS_MAX_COND {
        match gram.cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => svd_solve(&a, y)?,
        }
    } else {
        svd_solve(&a, y)?
    };
    Ok(DVector::from_fn(k, |j, _| solution[j] / scale[j]))
}

fn svd_solve(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let k = a.ncols();
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * f64::EPSILON * a.nrows().max(k) as f64;
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    if rank < k {
        return Err(Error::RankDeficient { active: k, rank });
    }
    svd.solve(y, tol)
        .map_err(|e| Error::invalid(format!("SVD solve failed: {e}")))
}

/// Sequentially thresholded least squares over every target column.
pub fn stlsq(theta: &DMatrix<f64>, targets: &DMatrix<f64>, threshold: f64, max_iters: usize) -> Result<CoefficientMatrix> {
    let support = vec![vec![true; theta.ncols()]; targets.ncols()];
    stlsq_from_support(theta, targets, threshold, max_iters, &support)
}

/// STLSQ started from a given support (`support[target][term]`).
pub fn stlsq_from_support(
    theta: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    threshold: f64,
    max_iters: usize,
    support: &[Vec<bool>],
) -> Result<CoefficientMatrix> {
    check_dim("stlsq rows", theta.nrows(), targets.nrows())?;
    check_dim("stlsq support targets", targets.ncols(), support.len())?;
    if !(threshold >= 0.0) || !threshold.is_finite() {
        return Err(Error::invalid(format!("threshold must be finite and >= 0, got {threshold}")));
    }
    if max_iters == 0 {
        return Err(Error::invalid("max_iters must be >= 1"));
    }
    if theta.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("stlsq inputs"));
    }
    let p = theta.ncols();
    let mut out = CoefficientMatrix::zeros(p, targets.ncols());
    out.threshold_used = threshold;

    for (col, mask) in support.iter().enumerate() {
        check_dim("stlsq support terms", p, mask.len())?;
        let y = targets.column(col).into_owned();
        let mut active: Vec<usize> = (0..p).filter(|&i| mask[i]).collect();
        let mut coef = vec![0.0; p];
        let mut iters = 0;
        let mut settled = false;
        while iters < max_iters {
            iters += 1;
            let sol = least_squares(theta, &y, &active)?;
            coef.iter_mut().for_each(|c| *c = 0.0);
            for (j, &i) in active.iter().enumerate() {
                coef[i] = sol[j];
            }
            let kept: Vec<usize> = active.iter().copied().filter(|&i| coef[i].abs() >= threshold).collect();
            out.support_history[col].push(kept.len());
            if kept.len() == active.len() {
                settled = true;
                break;
            }
            active = kept;
        }
        if !settled {
            // Keep the retained-coefficient invariant even without a fixed point.
            for c in coef.iter_mut() {
                if c.abs() < threshold {
                    *c = 0.0;
                }
            }
            out.converged = false;
        }
        out.iterations = out.iterations.max(iters);
        for (i, c) in coef.into_iter().enumerate() {
            out.xi[(i, col)] = c;
        }
    }
    Ok(out)
}

/// Rolls `s_{k+1} = s_k + Theta(s_k, a_k) xi` forward. Untracked state
/// entries are held at their initial values.
pub fn simulate_identified(
    coeffs: &CoefficientMatrix,
    library: &CandidateLibrary,
    initial: &[f64],
    actions: &[ActionVector],
) -> Result<Vec<Vec<f64>>> {
    simulate_identified_with(coeffs, library, initial, actions, |_, _, _, _| {})
}

/// Like [`simulate_identified`], with `untracked(step, prev_state, action,
/// next_state)` filling in the state entries the model does not predict
/// (exogenous inputs, known mechanisms).
pub fn simulate_identified_with<F>(
    coeffs: &CoefficientMatrix,
    library: &CandidateLibrary,
    initial: &[f64],
    actions: &[ActionVector],
    mut untracked: F,
) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(usize, &[f64], &[f64], &mut [f64]),
{
    check_dim("coefficient rows", library.len(), coeffs.xi.nrows())?;
    check_dim("coefficient columns", library.targets.len(), coeffs.xi.ncols())?;
    let mut states = Vec::with_capacity(actions.len() + 1);
    states.push(initial.to_vec());
    for (k, a) in actions.iter().enumerate() {
        let cur = &states[k];
        let row = library.eval(cur, a)?;
        let mut next = cur.clone();
        untracked(k, cur, a, &mut next);
        for (c, &ti) in library.targets.iter().enumerate() {
            let delta: f64 = row.iter().enumerate().map(|(r, v)| v * coeffs.xi[(r, c)]).sum();
            next[ti] = cur[ti] + delta;
        }
        if next.iter().any(|v| !v.is_finite() || v.abs() > SANITY_BOUND) {
            return Err(Error::Diverged(format!("identified model left sanity bounds at step {}", k + 1)));
        }
        states.push(next);
    }
    Ok(states)
}

/// CSV of `term,target,coefficient` for every non-zero coefficient.
pub fn export_coefficients(coeffs: &CoefficientMatrix, library: &CandidateLibrary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::from("term,target,coefficient\n");
    for (c, target) in library.target_names.iter().enumerate() {
        for (r, term) in library.terms.iter().enumerate() {
            let v = coeffs.xi[(r, c)];
            if v != 0.0 {
                let _ = writeln!(text, "{},{},{}", term.name, target, fmt_f64(v));
            }
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// The exact DollHouse coefficient matrix over [`CandidateLibrary::dollhouse`].
pub fn dollhouse_true_coefficients(params: &DollHouseParams, library: &CandidateLibrary) -> Result<DMatrix<f64>> {
    let idx = |name: &str| {
        library
            .term_index(name)
            .ok_or_else(|| Error::invalid(format!("library lacks term {name}")))
    };
    let mut xi = DMatrix::zeros(library.len(), 2);
    for (col, (me, other, heater)) in [("T1", "T2", "heater1"), ("T2", "T1", "heater2")].into_iter().enumerate() {
        xi[(idx("T_out")?, col)] = params.k_out;
        xi[(idx(me)?, col)] = -params.k_out;
        xi[(idx(&format!("{me}*damper"))?, col)] = -params.k_zone;
        xi[(idx(&format!("{other}*damper"))?, col)] = params.k_zone;
        xi[(idx(heater)?, col)] = params.k_heat;
    }
    Ok(xi)
}

/// Identified thermal coefficients read back from a DollHouse model.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ThermalCoefficients {
    pub k_out: f64,
    pub k_zone: f64,
    pub k_heat: f64,
}

pub fn read_dollhouse_coefficients(coeffs: &CoefficientMatrix, library: &CandidateLibrary) -> Result<ThermalCoefficients> {
    let idx = |name: &str| {
        library
            .term_index(name)
            .ok_or_else(|| Error::invalid(format!("library lacks term {name}")))
    };
    if coeffs.nonzero_count() == 0 {
        warn!("identified model is empty (threshold {} removed every term)", coeffs.threshold_used);
    }
    Ok(ThermalCoefficients {
        k_out: coeffs.xi[(idx("T_out")?, 0)],
        k_zone: coeffs.xi[(idx("T2*damper")?, 0)],
        k_heat: coeffs.xi[(idx("heater1")?, 0)],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn constant_column_is_ones() {
        let lib = CandidateLibrary::for_dims(2, 1).unwrap();
        let row = lib.eval(&[1.0, 2.0], &[3.0]).unwrap();
        assert_eq!(row[lib.term_index("1").unwrap()], 1.0);
        assert_eq!(row[lib.term_index("x0*u0").unwrap()], 3.0);
        assert_eq!(row[lib.term_index("x1*x1").unwrap()], 4.0);
    }

    #[test]
    fn library_term_count() {
        // 1 + (2 + 1) + 2*1 + 3 = 9
        assert_eq!(CandidateLibrary::for_dims(2, 1).unwrap().len(), 9);
        // 1 + 8 + 5*3 + (15 - 2 boolean squares) = 37
        assert_eq!(CandidateLibrary::dollhouse(0.5).unwrap().len(), 37);
    }

    #[test]
    fn duplicate_terms_rejected() {
        let vars = vec![Variable::state("x", 0)];
        let t = |n: &str| Term {
            name: n.into(),
            factors: vec![0],
        };
        assert!(CandidateLibrary::from_terms(vars, vec![t("a"), t("a")], vec![0], vec!["x".into()]).is_err());
    }

    fn planted(rng: &mut SeededRng, rows: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let p = 6;
        let theta = DMatrix::from_fn(rows, p, |_, _| rng.uniform(-1.0, 1.0));
        let mut xi = DMatrix::zeros(p, 2);
        xi[(0, 0)] = 0.5;
        xi[(3, 0)] = -1.25;
        xi[(1, 1)] = 2.0;
        xi[(5, 1)] = 0.3;
        let y = &theta * &xi;
        (theta, y, xi)
    }

    #[test]
    fn recovers_planted_sparse_model() {
        let mut rng = SeededRng::new(9);
        let (theta, y, xi) = planted(&mut rng, 80);
        let fit = stlsq(&theta, &y, 0.1, 20).unwrap();
        assert!(fit.converged);
        assert!((&fit.xi - &xi).amax() < 1e-8);
    }

    #[test]
    fn zero_targets_give_zero_model() {
        let mut rng = SeededRng::new(1);
        let (theta, _, _) = planted(&mut rng, 40);
        let fit = stlsq(&theta, &DMatrix::zeros(40, 2), 0.01, 20).unwrap();
        assert_eq!(fit.nonzero_count(), 0);
    }

    #[test]
    fn zero_threshold_is_plain_least_squares() {
        let mut rng = SeededRng::new(2);
        let theta = DMatrix::from_fn(30, 4, |_, _| rng.uniform(-1.0, 1.0));
        let y = DMatrix::from_fn(30, 1, |_, _| rng.normal());
        let fit = stlsq(&theta, &y, 0.0, 5).unwrap();
        let qr = theta.clone().qr();
        let ls = qr.r().solve_upper_triangular(&(qr.q().transpose() * &y)).unwrap();
        assert!((&fit.xi - &ls).amax() < 1e-10);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let mut rng = SeededRng::new(3);
        let mut theta = DMatrix::from_fn(30, 3, |_, _| rng.uniform(-1.0, 1.0));
        let c0 = theta.column(0).into_owned();
        theta.set_column(2, &(c0 * 2.0));
        let y = DMatrix::from_fn(30, 1, |_, _| rng.normal());
        assert!(matches!(stlsq(&theta, &y, 0.01, 10), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn ill_conditioned_uses_fallback_and_stays_accurate() {
        // Columns x and x + 1e-6 noise: Gram condition far above 1e8.
        let mut rng = SeededRng::new(4);
        let x: Vec<f64> = (0..200).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let theta = DMatrix::from_fn(200, 2, |r, c| if c == 0 { x[r] } else { x[r] + 1e-6 * ((r * 7 % 13) as f64 - 6.0) });
        let xi = DMatrix::from_column_slice(2, 1, &[1.0, -0.5]);
        let y = &theta * &xi;
        let fit = stlsq(&theta, &y, 0.0, 3).unwrap();
        assert!((&fit.xi - &xi).amax() < 1e-5);
    }

    #[test]
    fn zero_model_simulates_constant() {
        let lib = CandidateLibrary::for_dims(2, 1).unwrap();
        let z = CoefficientMatrix::zeros(lib.len(), 2);
        let acts = vec![ActionVector::new(vec![1.0]).unwrap(); 5];
        let traj = simulate_identified(&z, &lib, &[0.3, -2.0], &acts).unwrap();
        assert!(traj.iter().all(|s| s == &vec![0.3, -2.0]));
    }

    #[test]
    fn one_step_simulation_is_definition() {
        let lib = CandidateLibrary::for_dims(2, 1).unwrap();
        let mut c = CoefficientMatrix::zeros(lib.len(), 2);
        let mut rng = SeededRng::new(5);
        for v in c.xi.iter_mut() {
            *v = rng.uniform(-0.1, 0.1);
        }
        let s0 = [0.4, 0.9];
        let a0 = ActionVector::new(vec![-0.2]).unwrap();
        let traj = simulate_identified(&c, &lib, &s0, std::slice::from_ref(&a0)).unwrap();
        let row = DVector::from_vec(lib.eval(&s0, &a0).unwrap());
        let delta = c.xi.transpose() * row;
        assert_eq!(traj[1], vec![s0[0] + delta[0], s0[1] + delta[1]]);
    }

    #[test]
    fn divergence_detected() {
        let lib = CandidateLibrary::for_dims(1, 0).unwrap();
        let mut c = CoefficientMatrix::zeros(lib.len(), 1);
        c.xi[(lib.term_index("x0").unwrap(), 0)] = 1.0; // doubles every step
        let acts = vec![ActionVector::new(vec![]).unwrap(); 100];
        assert!(matches!(simulate_identified(&c, &lib, &[1.0], &acts), Err(Error::Diverged(_))));
    }
}
