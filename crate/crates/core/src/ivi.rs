//! Interval value iteration over bounded-parameter MDPs.
//!
//! Each sweep orders successor states by the current value estimate and picks
//! the member row that pushes as much probability mass as the intervals allow
//! toward the lowest-valued (lower bound) or highest-valued (upper bound)
//! states, then performs one Bellman backup on that row.

use crate::error::{Error, Result};
use crate::interval::{bound_sums, Bmdp, Interval};
use crate::mdp::{
    argmax_first, expectation, iterate_to_tolerance, ExplicitMdp, Policy, Row, ValueFunction,
};
use crate::scalar::{Scalar, ROW_SUM_TOL};

/// Which extreme member of an interval row to select.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Minimize,
    Maximize,
}

/// Interval bounds on optimal values and the pessimistic optimal policy.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedValueResult<T> {
    pub lower: ValueFunction<T>,
    pub upper: ValueFunction<T>,
    pub pessimistic_policy: Policy,
    pub iterations_lower: usize,
    pub iterations_upper: usize,
}

impl<T: Scalar> BoundedValueResult<T> {
    /// `upper − lower` per state.
    pub fn widths(&self) -> Vec<T> {
        self.upper
            .iter()
            .zip(self.lower.iter())
            .map(|(&u, &l)| u - l)
            .collect()
    }
}

/// The probability row inside `row`'s bounds that minimizes (or maximizes)
/// the expected value of `values`.
///
/// Starts from the lower bounds and hands the remaining mass to successors in
/// ascending value order (descending for [`Extremum::Maximize`]), ties by
/// ascending state index, each up to its upper bound.
pub fn extreme_transition_vector<T: Scalar>(
    row: &[(usize, Interval<T>)],
    values: &[T],
    mode: Extremum,
) -> Result<Row<T>> {
    let (sum_lo, sum_hi) = bound_sums(row);
    let tol = T::tol(ROW_SUM_TOL);
    if sum_lo > T::one() + tol || sum_hi < T::one() - tol {
        return Err(Error::InfeasibleRow {
            sum_lo: sum_lo.as_f64(),
            sum_hi: sum_hi.as_f64(),
        });
    }
    let mut out: Row<T> = row.iter().map(|&(q, iv)| (q, iv.lo)).collect();
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&i, &j| {
        let (vi, vj) = (values[row[i].0], values[row[j].0]);
        let by_value = match mode {
            Extremum::Minimize => vi.partial_cmp(&vj),
            Extremum::Maximize => vj.partial_cmp(&vi),
        };
        by_value
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(row[i].0.cmp(&row[j].0))
    });
    let mut residual = T::one() - sum_lo;
    for i in order {
        if residual <= T::zero() {
            break;
        }
        let add = row[i].1.width().min(residual);
        out[i].1 = out[i].1 + add;
        residual = residual - add;
    }
    Ok(out)
}

fn extreme_backup<T: Scalar>(
    b: &Bmdp<T>,
    state: usize,
    action: usize,
    values: &[T],
    mode: Extremum,
) -> Result<T> {
    let reward = match mode {
        Extremum::Minimize => b.reward_bounds()[state].lo,
        Extremum::Maximize => b.reward_bounds()[state].hi,
    };
    let row = extreme_transition_vector(b.row(action, state), values, mode)?;
    Ok(reward + b.discount() * expectation(&row, values))
}

/// Jacobi sweeps of the interval Bellman operator; `policy` fixes the action
/// per state, otherwise the best action is taken.
fn interval_iteration<T: Scalar>(
    b: &Bmdp<T>,
    policy: Option<&Policy>,
    mode: Extremum,
    tol: T,
) -> Result<(Vec<T>, usize)> {
    iterate_to_tolerance(b.n_states(), b.discount(), tol, None, |v, out| {
        for (p, slot) in out.iter_mut().enumerate() {
            *slot = match policy {
                Some(pi) => extreme_backup(b, p, pi[p], v, mode)?,
                None => {
                    let mut best = T::neg_infinity();
                    for a in 0..b.n_actions() {
                        best = best.max(extreme_backup(b, p, a, v, mode)?);
                    }
                    best
                }
            };
        }
        Ok(())
    })
}

/// Lower and upper bounds on the optimal value of every state over all
/// members of the family of `b`, plus the pessimistic optimal policy.
pub fn ivi_bound_optimal<T: Scalar>(b: &Bmdp<T>, tol: T) -> Result<BoundedValueResult<T>> {
    b.ensure_valid()?;
    let (lower, iterations_lower) = interval_iteration(b, None, Extremum::Minimize, tol)?;
    let (upper, iterations_upper) = interval_iteration(b, None, Extremum::Maximize, tol)?;
    let lower = ValueFunction(lower);
    let pessimistic_policy = extract_pessimistic_policy(b, &lower)?;
    Ok(BoundedValueResult {
        lower,
        upper: ValueFunction(upper),
        pessimistic_policy,
        iterations_lower,
        iterations_upper,
    })
}

/// Lower and upper bounds on the value of `policy` over the family of `b`.
pub fn ivi_bound_policy<T: Scalar>(
    b: &Bmdp<T>,
    policy: &Policy,
    tol: T,
) -> Result<(ValueFunction<T>, ValueFunction<T>)> {
    b.ensure_valid()?;
    policy.check(b.n_states(), b.n_actions())?;
    let (lower, _) = interval_iteration(b, Some(policy), Extremum::Minimize, tol)?;
    let (upper, _) = interval_iteration(b, Some(policy), Extremum::Maximize, tol)?;
    Ok((ValueFunction(lower), ValueFunction(upper)))
}

/// Greedy policy against the IVI lower bound, ties to the smallest action.
pub fn extract_pessimistic_policy<T: Scalar>(b: &Bmdp<T>, lower: &[T]) -> Result<Policy> {
    if lower.len() != b.n_states() {
        return Err(Error::ShapeMismatch(format!(
            "value function covers {} states, BMDP has {}",
            lower.len(),
            b.n_states()
        )));
    }
    let mut actions = Vec::with_capacity(b.n_states());
    let mut q = vec![T::zero(); b.n_actions()];
    for p in 0..b.n_states() {
        for (a, slot) in q.iter_mut().enumerate() {
            *slot = extreme_backup(b, p, a, lower, Extremum::Minimize)?;
        }
        actions.push(argmax_first(&q));
    }
    Ok(Policy(actions))
}

/// Action set used by [`materialize_extreme_mdp`].
#[derive(Debug, Clone, Copy)]
pub enum ActionScope<'a> {
    /// Keep every action; the result is a member of the family of `b`.
    All,
    /// Keep only the policy's action per state, giving a single-action MDP
    /// that is a member of `b.restrict_to_policy(policy)`.
    Policy(&'a Policy),
}

/// Builds the exact MDP whose rows are the extreme rows for `values`, with
/// lower rewards when minimizing and upper rewards when maximizing.
pub fn materialize_extreme_mdp<T: Scalar>(
    b: &Bmdp<T>,
    values: &[T],
    scope: ActionScope<'_>,
    mode: Extremum,
) -> Result<ExplicitMdp<T>> {
    b.ensure_valid()?;
    if values.len() != b.n_states() {
        return Err(Error::ShapeMismatch(format!(
            "value function covers {} states, BMDP has {}",
            values.len(),
            b.n_states()
        )));
    }
    let rewards = b
        .reward_bounds()
        .iter()
        .map(|iv| match mode {
            Extremum::Minimize => iv.lo,
            Extremum::Maximize => iv.hi,
        })
        .collect();
    let transitions = match scope {
        ActionScope::All => (0..b.n_actions())
            .map(|a| {
                (0..b.n_states())
                    .map(|p| extreme_transition_vector(b.row(a, p), values, mode))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?,
        ActionScope::Policy(policy) => {
            policy.check(b.n_states(), b.n_actions())?;
            vec![(0..b.n_states())
                .map(|p| extreme_transition_vector(b.row(policy[p], p), values, mode))
                .collect::<Result<Vec<_>>>()?]
        }
    };
    let n_actions = transitions.len();
    Ok(ExplicitMdp::new(
        b.n_states(),
        n_actions,
        b.discount(),
        rewards,
        transitions,
    ))
}
