//! Explicit (flat) MDPs: representation, validation, policy evaluation and
//! value iteration.

use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};
use crate::scalar::{sup_distance, Scalar, EQ_TOL, ROW_SUM_TOL};

/// Hard cap on sweeps for every successive-approximation loop in the crate.
pub const MAX_ITERATIONS: usize = 1_000_000;

/// Sparse transition row: `(to_state, probability)` pairs in ascending
/// `to_state` order.
pub type Row<T> = Vec<(usize, T)>;

/// A flat MDP with state-only rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitMdp<T> {
    n_states: usize,
    n_actions: usize,
    discount: T,
    rewards: Vec<T>,
    /// Indexed `[action][state]`.
    transitions: Vec<Vec<Row<T>>>,
}

impl<T: Scalar> ExplicitMdp<T> {
    /// Builds an MDP without validating it. Rows are sorted by to-state.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        discount: T,
        rewards: Vec<T>,
        mut transitions: Vec<Vec<Row<T>>>,
    ) -> Self {
        for row in transitions.iter_mut().flatten() {
            row.sort_by_key(|&(q, _)| q);
        }
        Self {
            n_states,
            n_actions,
            discount,
            rewards,
            transitions,
        }
    }

    /// Builds an MDP and rejects it if any invariant is violated.
    pub fn try_new(
        n_states: usize,
        n_actions: usize,
        discount: T,
        rewards: Vec<T>,
        transitions: Vec<Vec<Row<T>>>,
    ) -> Result<Self> {
        let m = Self::new(n_states, n_actions, discount, rewards, transitions);
        m.ensure_valid()?;
        Ok(m)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> T {
        self.discount
    }

    pub fn rewards(&self) -> &[T] {
        &self.rewards
    }

    pub fn reward(&self, state: usize) -> T {
        self.rewards[state]
    }

    /// All rows, indexed `[action][state]`.
    pub fn transitions(&self) -> &[Vec<Row<T>>] {
        &self.transitions
    }

    pub fn row(&self, action: usize, state: usize) -> &[(usize, T)] {
        &self.transitions[action][state]
    }

    /// Probability of moving from `from` to `to` under `action`.
    pub fn prob(&self, action: usize, from: usize, to: usize) -> T {
        let row = self.row(action, from);
        row.binary_search_by_key(&to, |&(q, _)| q)
            .map(|i| row[i].1)
            .unwrap_or_else(|_| T::zero())
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        check_discount(self.discount, &mut report);
        if self.rewards.len() != self.n_states {
            report.push(
                Location::Model,
                ViolationKind::Shape,
                format!(
                    "reward vector has {} entries for {} states",
                    self.rewards.len(),
                    self.n_states
                ),
            );
        }
        for (s, r) in self.rewards.iter().enumerate() {
            if !r.is_finite() {
                report.push(
                    Location::Reward { state: s },
                    ViolationKind::NonFinite,
                    "reward is not finite".into(),
                );
            }
        }
        if !check_table_shape(&self.transitions, self.n_states, self.n_actions, &mut report) {
            return report;
        }
        for (a, rows) in self.transitions.iter().enumerate() {
            for (s, row) in rows.iter().enumerate() {
                check_row_indices(row, a, s, self.n_states, &mut report);
                let mut sum = T::zero();
                for &(q, p) in row {
                    sum = sum + p;
                    if !(p >= T::zero() && p <= T::one()) {
                        report.push(
                            Location::Entry {
                                action: a,
                                state: s,
                                to: q,
                            },
                            ViolationKind::ProbabilityOutOfRange,
                            format!("probability out of range: {p}"),
                        );
                    }
                }
                if !((sum - T::one()).abs() <= T::tol(ROW_SUM_TOL)) {
                    report.push(
                        Location::Row { action: a, state: s },
                        ViolationKind::RowSum,
                        format!("row sum {sum}"),
                    );
                }
            }
        }
        report
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidMdp(report))
        }
    }

    /// One-step lookahead value `R(p) + γ Σ_q F_pq(α) V(q)`.
    pub fn q_value(&self, state: usize, action: usize, values: &[T]) -> T {
        self.rewards[state] + self.discount * expectation(self.row(action, state), values)
    }

    /// Greedy action with respect to `values`, ties to the smallest index.
    pub fn greedy_action(&self, state: usize, values: &[T]) -> usize {
        let q: Vec<T> = (0..self.n_actions)
            .map(|a| self.q_value(state, a, values))
            .collect();
        argmax_first(&q)
    }

    pub fn greedy_policy(&self, values: &[T]) -> Policy {
        Policy((0..self.n_states).map(|p| self.greedy_action(p, values)).collect())
    }
}

pub(crate) fn check_discount<T: Scalar>(discount: T, report: &mut ValidationReport) {
    if !(discount >= T::zero() && discount < T::one()) {
        let msg = if discount >= T::one() {
            format!("discount must be < 1 (got {discount})")
        } else {
            format!("discount must be in [0, 1) (got {discount})")
        };
        report.push(Location::Model, ViolationKind::Discount, msg);
    }
}

/// Returns false when the table is too malformed to inspect row by row.
pub(crate) fn check_table_shape<R>(
    table: &[Vec<R>],
    n_states: usize,
    n_actions: usize,
    report: &mut ValidationReport,
) -> bool {
    let mut ok = true;
    if table.len() != n_actions {
        report.push(
            Location::Model,
            ViolationKind::Shape,
            format!("transition table has {} actions, expected {n_actions}", table.len()),
        );
        ok = false;
    }
    for (a, rows) in table.iter().enumerate() {
        if rows.len() != n_states {
            report.push(
                Location::Model,
                ViolationKind::Shape,
                format!("action a{a} has {} rows, expected {n_states}", rows.len()),
            );
            ok = false;
        }
    }
    ok
}

pub(crate) fn check_row_indices<V>(
    row: &[(usize, V)],
    action: usize,
    state: usize,
    n_states: usize,
    report: &mut ValidationReport,
) {
    for (i, &(q, _)) in row.iter().enumerate() {
        let at = Location::Entry {
            action,
            state,
            to: q,
        };
        if q >= n_states {
            report.push(at, ViolationKind::StateOutOfRange, "to-state out of range".into());
        } else if i > 0 && row[i - 1].0 == q {
            report.push(at, ViolationKind::DuplicateEntry, "duplicate to-state".into());
        }
    }
}

pub(crate) fn expectation<T: Scalar>(row: &[(usize, T)], values: &[T]) -> T {
    row.iter().fold(T::zero(), |acc, &(q, p)| acc + p * values[q])
}

/// Index of the first entry within `EQ_TOL` of the maximum.
pub(crate) fn argmax_first<T: Scalar>(xs: &[T]) -> usize {
    let best = xs.iter().copied().fold(T::neg_infinity(), T::max);
    xs.iter()
        .position(|&x| x >= best - T::tol(EQ_TOL))
        .unwrap_or(0)
}

/// Where a validation problem was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Model,
    Reward { state: usize },
    Row { action: usize, state: usize },
    Entry { action: usize, state: usize, to: usize },
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Location::Model => write!(f, "model"),
            Location::Reward { state } => write!(f, "(s{state})"),
            Location::Row { action, state } => write!(f, "(a{action}, s{state})"),
            Location::Entry { action, state, to } => write!(f, "(a{action}, s{state}, s{to})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Discount,
    Shape,
    NonFinite,
    RowSum,
    ProbabilityOutOfRange,
    StateOutOfRange,
    DuplicateEntry,
    IntervalInverted,
    LowerSumExceedsOne,
    UpperSumBelowOne,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub location: Location,
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}", self.message, self.location)
    }
}

/// Result of validating a model. Violations are data, not failures.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    pub(crate) fn push(&mut self, location: Location, kind: ViolationKind, message: String) {
        self.violations.push(Violation {
            location,
            kind,
            message,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Deterministic stationary policy: one action index per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Policy(pub Vec<usize>);

impl Policy {
    pub fn constant(n_states: usize, action: usize) -> Self {
        Policy(vec![action; n_states])
    }

    pub fn check(&self, n_states: usize, n_actions: usize) -> Result<()> {
        if self.0.len() != n_states {
            return Err(Error::ShapeMismatch(format!(
                "policy covers {} states, model has {n_states}",
                self.0.len()
            )));
        }
        if let Some(&a) = self.0.iter().find(|&&a| a >= n_actions) {
            return Err(Error::ShapeMismatch(format!(
                "policy action {a} out of range for {n_actions} actions"
            )));
        }
        Ok(())
    }

    /// Every deterministic policy over `n_states` states, in lexicographic order.
    pub fn enumerate(n_states: usize, n_actions: usize) -> impl Iterator<Item = Policy> {
        let total = (n_actions as u64).pow(n_states as u32);
        (0..total).map(move |mut code| {
            let mut actions = vec![0; n_states];
            for a in actions.iter_mut() {
                *a = (code % n_actions as u64) as usize;
                code /= n_actions as u64;
            }
            Policy(actions)
        })
    }
}

impl Deref for Policy {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction<T>(pub Vec<T>);

impl<T> Deref for ValueFunction<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

/// Runs `step` from `V_0 ≡ 0` until `‖V_{k+1} − V_k‖∞ ≤ tol·(1−γ)/(2γ)`, which
/// puts the final iterate within `tol` of the fixed point of a γ-contraction.
pub(crate) fn iterate_to_tolerance<T: Scalar>(
    n: usize,
    discount: T,
    tol: T,
    mut residuals: Option<&mut Vec<T>>,
    mut step: impl FnMut(&[T], &mut [T]) -> Result<()>,
) -> Result<(Vec<T>, usize)> {
    check_tol(tol)?;
    let threshold = if discount > T::zero() {
        tol * (T::one() - discount) / (discount + discount)
    } else {
        T::infinity()
    };
    let mut current = vec![T::zero(); n];
    let mut next = vec![T::zero(); n];
    for iteration in 1..=MAX_ITERATIONS {
        step(&current, &mut next)?;
        let delta = sup_distance(&current, &next);
        if let Some(r) = residuals.as_deref_mut() {
            r.push(delta);
        }
        std::mem::swap(&mut current, &mut next);
        if delta <= threshold {
            return Ok((current, iteration));
        }
    }
    Err(Error::NotConverged(MAX_ITERATIONS))
}

pub(crate) fn check_tol<T: Scalar>(tol: T) -> Result<()> {
    if tol > T::zero() {
        Ok(())
    } else {
        Err(Error::NonPositiveTolerance(tol.as_f64()))
    }
}

/// Value of `policy` in `m`, within `tol` of the exact solution in sup-norm.
pub fn policy_evaluate<T: Scalar>(
    m: &ExplicitMdp<T>,
    policy: &Policy,
    tol: T,
) -> Result<ValueFunction<T>> {
    m.ensure_valid()?;
    policy.check(m.n_states, m.n_actions)?;
    let (values, _) = iterate_to_tolerance(m.n_states, m.discount, tol, None, |v, out| {
        for (p, slot) in out.iter_mut().enumerate() {
            *slot = m.q_value(p, policy[p], v);
        }
        Ok(())
    })?;
    Ok(ValueFunction(values))
}

/// Optimal values (within `tol`) and the greedy policy for them.
pub fn value_iterate<T: Scalar>(
    m: &ExplicitMdp<T>,
    tol: T,
) -> Result<(ValueFunction<T>, Policy)> {
    let (values, _) = run_value_iteration(m, tol, None)?;
    let policy = m.greedy_policy(&values);
    Ok((ValueFunction(values), policy))
}

/// Per-sweep sup-norm residuals `‖V_{k+1} − V_k‖∞` of value iteration.
pub fn value_iteration_residuals<T: Scalar>(m: &ExplicitMdp<T>, tol: T) -> Result<Vec<T>> {
    let mut residuals = Vec::new();
    run_value_iteration(m, tol, Some(&mut residuals))?;
    Ok(residuals)
}

fn run_value_iteration<T: Scalar>(
    m: &ExplicitMdp<T>,
    tol: T,
    residuals: Option<&mut Vec<T>>,
) -> Result<(Vec<T>, usize)> {
    m.ensure_valid()?;
    iterate_to_tolerance(m.n_states, m.discount, tol, residuals, |v, out| {
        for (p, slot) in out.iter_mut().enumerate() {
            *slot = (0..m.n_actions)
                .map(|a| m.q_value(p, a, v))
                .fold(T::neg_infinity(), T::max);
        }
        Ok(())
    })
}
