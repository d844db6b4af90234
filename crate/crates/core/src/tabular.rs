//! Exact tabular MDP solvers and an empirical check of the greedy-policy
//! performance-gap bound `‖V* − V^{π_f}‖∞ ≤ 2‖f − Q*‖∞ / (1 − γ)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::seed::derive_seed;

/// Iteration tolerance used by [`check_bound`].
pub const SOLVE_TOL: f64 = 1e-10;
/// Slack allowed on the bound to absorb floating error.
pub const BOUND_SLACK: f64 = 1e-8;
const ROW_SUM_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 1_000_000;

/// A finite MDP with explicit transition tensor and reward table.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    // indexed [s][a][s'] flattened
    p: Vec<f64>,
    // indexed [s][a] flattened
    r: Vec<f64>,
    gamma: f64,
}

impl TabularMdp {
    pub fn new(p: Vec<Vec<Vec<f64>>>, r: Vec<Vec<f64>>, gamma: f64) -> Result<Self> {
        let n_states = p.len();
        if n_states == 0 {
            return Err(Error::config("MDP needs at least one state"));
        }
        let n_actions = p[0].len();
        if n_actions == 0 {
            return Err(Error::config("MDP needs at least one action"));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::config(format!("discount must lie in (0, 1), got {gamma}")));
        }
        if r.len() != n_states || r.iter().any(|row| row.len() != n_actions) {
            return Err(Error::config("reward table shape does not match transitions"));
        }
        let mut flat = Vec::with_capacity(n_states * n_actions * n_states);
        for (s, per_action) in p.iter().enumerate() {
            if per_action.len() != n_actions {
                return Err(Error::config(format!("state {s} has {} actions, expected {n_actions}", per_action.len())));
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != n_states {
                    return Err(Error::config(format!("P[{s}][{a}] has length {}", row.len())));
                }
                if row.iter().any(|&x| !x.is_finite() || x < 0.0) {
                    return Err(Error::config(format!("P[{s}][{a}] has a negative or non-finite entry")));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::config(format!("P[{s}][{a}] sums to {sum}")));
                }
                flat.extend_from_slice(row);
            }
        }
        let r: Vec<f64> = r.into_iter().flatten().collect();
        if r.iter().any(|x| !x.is_finite()) {
            return Err(Error::config("rewards must be finite"));
        }
        Ok(TabularMdp {
            n_states,
            n_actions,
            p: flat,
            r,
            gamma,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.p[(s * self.n_actions + a) * self.n_states + next]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.r[s * self.n_actions + a]
    }

    fn next_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.p[start..start + self.n_states]
    }

    fn backup(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        let ev: f64 = self.next_row(s, a).iter().zip(v).map(|(p, v)| p * v).sum();
        self.reward(s, a) + self.gamma * ev
    }

    /// `Q(s, a) = r(s, a) + γ Σ P(s'|s,a) V(s')`.
    pub fn q_from(&self, v: &[f64]) -> Result<QTable> {
        check_len("state values", self.n_states, v.len())?;
        let values = (0..self.n_states)
            .flat_map(|s| (0..self.n_actions).map(move |a| (s, a)))
            .map(|(s, a)| self.backup(s, a, v))
            .collect();
        Ok(QTable {
            n_states: self.n_states,
            n_actions: self.n_actions,
            values,
        })
    }

    /// One application of the Bellman optimality operator.
    pub fn bellman_optimal(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.q_from(v)?.max_per_state())
    }

    /// One application of the Bellman operator of a deterministic policy.
    pub fn bellman_policy(&self, policy: &[usize], v: &[f64]) -> Result<Vec<f64>> {
        self.check_policy(policy)?;
        check_len("state values", self.n_states, v.len())?;
        Ok((0..self.n_states).map(|s| self.backup(s, policy[s], v)).collect())
    }

    fn check_policy(&self, policy: &[usize]) -> Result<()> {
        check_len("policy", self.n_states, policy.len())?;
        if let Some(&a) = policy.iter().find(|&&a| a >= self.n_actions) {
            return Err(Error::OutOfRange {
                what: "policy action",
                index: a,
                limit: self.n_actions,
            });
        }
        Ok(())
    }

    // residual threshold that guarantees ‖V − V_fix‖∞ < tol
    fn stop_threshold(&self, tol: f64) -> f64 {
        tol * (1.0 - self.gamma) / self.gamma
    }
}

fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    crate::error::check_dim(what, expected, actual)
}

/// State-action values `f[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_states = rows.len();
        let n_actions = rows.first().map_or(0, Vec::len);
        if n_states == 0 || n_actions == 0 {
            return Err(Error::config("Q-table must be non-empty"));
        }
        if rows.iter().any(|r| r.len() != n_actions) {
            return Err(Error::config("Q-table rows differ in length"));
        }
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::config("Q-table entries must be finite"));
        }
        Ok(QTable {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Applies `g` to every entry.
    pub fn map(&self, mut g: impl FnMut(f64) -> f64) -> QTable {
        QTable {
            values: self.values.iter().map(|&x| g(x)).collect(),
            ..*self
        }
    }

    pub fn max_per_state(&self) -> Vec<f64> {
        (0..self.n_states)
            .map(|s| self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    /// Sup-norm distance; tables must share a shape.
    pub fn sup_distance(&self, other: &QTable) -> Result<f64> {
        if (self.n_states, self.n_actions) != (other.n_states, other.n_actions) {
            return Err(Error::DimensionMismatch {
                context: "Q-table",
                expected: self.values.len(),
                actual: other.values.len(),
            });
        }
        Ok(sup_norm_diff(&self.values, &other.values))
    }
}

fn sup_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub q: QTable,
    pub v: Vec<f64>,
    pub iterations: usize,
}

/// Value iteration from `V = 0`.
pub fn value_iteration(mdp: &TabularMdp, tol: f64) -> Result<Solution> {
    value_iteration_from(mdp, tol, vec![0.0; mdp.n_states])
}

/// Value iteration from an arbitrary start; stops once the sup-norm residual
/// drops below `tol·(1−γ)/γ`, so the returned `V` is within `tol` of `V*`.
pub fn value_iteration_from(mdp: &TabularMdp, tol: f64, start: Vec<f64>) -> Result<Solution> {
    if !(tol > 0.0) {
        return Err(Error::config("tolerance must be positive"));
    }
    check_len("initial values", mdp.n_states, start.len())?;
    let threshold = mdp.stop_threshold(tol);
    let mut v = start;
    for it in 1..=MAX_ITERATIONS {
        let next = mdp.bellman_optimal(&v)?;
        let residual = sup_norm_diff(&next, &v);
        v = next;
        if residual < threshold {
            let q = mdp.q_from(&v)?;
            return Ok(Solution { q, v, iterations: it });
        }
    }
    Err(Error::config("value iteration did not converge"))
}

/// `π_f(s) = argmax_a f[s][a]`, ties toward the lowest index.
pub fn greedy_policy(f: &QTable) -> Vec<usize> {
    (0..f.n_states)
        .map(|s| {
            let row = f.row(s);
            let mut best = 0;
            for (a, &x) in row.iter().enumerate().skip(1) {
                if x > row[best] {
                    best = a;
                }
            }
            best
        })
        .collect()
}

/// Iterative evaluation of a deterministic policy, accurate to `tol`.
pub fn policy_evaluation(mdp: &TabularMdp, policy: &[usize], tol: f64) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::config("tolerance must be positive"));
    }
    mdp.check_policy(policy)?;
    let threshold = mdp.stop_threshold(tol);
    let mut v = vec![0.0; mdp.n_states];
    for _ in 0..MAX_ITERATIONS {
        let next = mdp.bellman_policy(policy, &v)?;
        let residual = sup_norm_diff(&next, &v);
        v = next;
        if residual < threshold {
            return Ok(v);
        }
    }
    Err(Error::config("policy evaluation did not converge"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    /// `‖V* − V^{π_f}‖∞`
    pub lhs: f64,
    /// `2‖f − Q*‖∞ / (1 − γ)`
    pub rhs: f64,
    pub holds: bool,
}

pub fn check_bound(mdp: &TabularMdp, f: &QTable) -> Result<BoundCheck> {
    let opt = value_iteration(mdp, SOLVE_TOL)?;
    let err = opt.q.sup_distance(f)?;
    let policy = greedy_policy(f);
    let v_pi = policy_evaluation(mdp, &policy, SOLVE_TOL)?;
    let lhs = sup_norm_diff(&opt.v, &v_pi);
    let rhs = 2.0 * err / (1.0 - mdp.gamma);
    Ok(BoundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + BOUND_SLACK,
    })
}

/// Transition rows from Dirichlet(1, ..., 1), rewards from U[0, 1].
pub fn random_mdp<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_actions: usize, gamma: f64) -> Result<TabularMdp> {
    let mut p = Vec::with_capacity(n_states);
    let mut r = Vec::with_capacity(n_states);
    for _ in 0..n_states {
        let mut per_action = Vec::with_capacity(n_actions);
        for _ in 0..n_actions {
            let draws: Vec<f64> = (0..n_states).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let total: f64 = draws.iter().sum();
            let mut row: Vec<f64> = draws.iter().map(|x| x / total).collect();
            // push rounding into the largest entry so the row sums to 1
            let drift = 1.0 - row.iter().sum::<f64>();
            let big = (0..n_states).fold(0, |b, i| if row[i] > row[b] { i } else { b });
            row[big] += drift;
            per_action.push(row);
        }
        p.push(per_action);
        r.push((0..n_actions).map(|_| rng.gen::<f64>()).collect());
    }
    TabularMdp::new(p, r, gamma)
}

/// Limits of the randomized bound check.
pub const MAX_TRIAL_STATES: usize = 10;
pub const MAX_TRIAL_ACTIONS: usize = 4;
pub const TRIAL_GAMMA: (f64, f64) = (0.5, 0.95);
pub const TRIAL_NOISE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaReport {
    pub trials: usize,
    pub holds: usize,
    /// Largest `lhs / rhs` over trials with `rhs > 0`.
    pub max_ratio: f64,
}

impl LemmaReport {
    pub fn all_hold(&self) -> bool {
        self.holds == self.trials
    }
}

/// One random trial: a random MDP and `f = Q* + U[−1, 1]` noise per entry.
pub fn lemma_trial(seed: u64) -> Result<BoundCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_states = rng.gen_range(1..=MAX_TRIAL_STATES);
    let n_actions = rng.gen_range(1..=MAX_TRIAL_ACTIONS);
    let gamma = rng.gen_range(TRIAL_GAMMA.0..=TRIAL_GAMMA.1);
    let mdp = random_mdp(&mut rng, n_states, n_actions, gamma)?;
    let q_star = value_iteration(&mdp, SOLVE_TOL)?.q;
    let f = q_star.map(|x| x + rng.gen_range(-TRIAL_NOISE..=TRIAL_NOISE));
    check_bound(&mdp, &f)
}

pub fn verify_lemma(trials: usize, seed: u64, exec: Execution) -> Result<LemmaReport> {
    let seeds: Vec<u64> = (0..trials as u64).map(|i| derive_seed(seed, i)).collect();
    let checks = exec.map(seeds, lemma_trial);
    let mut report = LemmaReport {
        trials,
        holds: 0,
        max_ratio: 0.0,
    };
    for check in checks {
        let check = check?;
        report.holds += usize::from(check.holds);
        if check.rhs > 0.0 {
            report.max_ratio = report.max_ratio.max(check.lhs / check.rhs);
        }
    }
    Ok(report)
}
