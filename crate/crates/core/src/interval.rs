//! Bounded-parameter MDPs: interval rewards and transition probabilities,
//! well-formedness, family membership and member sampling.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::{
    check_discount, check_row_indices, check_table_shape, ExplicitMdp, Location, Policy, Row,
    ValidationReport, ViolationKind,
};
use crate::scalar::{Scalar, EQ_TOL, ROW_SUM_TOL};

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn new(lo: T, hi: T) -> Self {
        Self { lo, hi }
    }

    pub fn point(x: T) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn zero() -> Self {
        Self::point(T::zero())
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> T {
        if self.lo == self.hi {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) / T::lit(2.0)
        }
    }

    pub fn contains(&self, x: T, tol: T) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }

    pub fn is_degenerate(&self, tol: T) -> bool {
        self.width() <= tol
    }
}

impl<T: fmt::Display> fmt::Display for Interval<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Sparse interval row, ascending in `to_state`; missing entries are `[0, 0]`.
pub type IntervalRow<T> = Vec<(usize, Interval<T>)>;

#[derive(Debug, Clone, PartialEq)]
pub struct Bmdp<T> {
    n_states: usize,
    n_actions: usize,
    discount: T,
    reward_bounds: Vec<Interval<T>>,
    /// Indexed `[action][state]`.
    transition_bounds: Vec<Vec<IntervalRow<T>>>,
}

impl<T: Scalar> Bmdp<T> {
    /// Builds a BMDP without validating it. Rows are sorted by to-state.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        discount: T,
        reward_bounds: Vec<Interval<T>>,
        mut transition_bounds: Vec<Vec<IntervalRow<T>>>,
    ) -> Self {
        for row in transition_bounds.iter_mut().flatten() {
            row.sort_by_key(|&(q, _)| q);
        }
        Self {
            n_states,
            n_actions,
            discount,
            reward_bounds,
            transition_bounds,
        }
    }

    pub fn try_new(
        n_states: usize,
        n_actions: usize,
        discount: T,
        reward_bounds: Vec<Interval<T>>,
        transition_bounds: Vec<Vec<IntervalRow<T>>>,
    ) -> Result<Self> {
        let b = Self::new(n_states, n_actions, discount, reward_bounds, transition_bounds);
        b.ensure_valid()?;
        Ok(b)
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

    pub fn reward_bounds(&self) -> &[Interval<T>] {
        &self.reward_bounds
    }

    pub fn transition_bounds(&self) -> &[Vec<IntervalRow<T>>] {
        &self.transition_bounds
    }

    pub fn row(&self, action: usize, state: usize) -> &[(usize, Interval<T>)] {
        &self.transition_bounds[action][state]
    }

    /// Interval for `from → to` under `action`, `[0, 0]` when absent.
    pub fn bound(&self, action: usize, from: usize, to: usize) -> Interval<T> {
        let row = self.row(action, from);
        row.binary_search_by_key(&to, |&(q, _)| q)
            .map(|i| row[i].1)
            .unwrap_or_else(|_| Interval::zero())
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        check_discount(self.discount, &mut report);
        if self.reward_bounds.len() != self.n_states {
            report.push(
                Location::Model,
                ViolationKind::Shape,
                format!(
                    "reward bounds have {} entries for {} states",
                    self.reward_bounds.len(),
                    self.n_states
                ),
            );
        }
        for (s, r) in self.reward_bounds.iter().enumerate() {
            let at = Location::Reward { state: s };
            if !(r.lo.is_finite() && r.hi.is_finite()) {
                report.push(at, ViolationKind::NonFinite, "reward bound is not finite".into());
            } else if r.lo > r.hi {
                report.push(at, ViolationKind::IntervalInverted, format!("lo > hi in {r}"));
            }
        }
        if !check_table_shape(
            &self.transition_bounds,
            self.n_states,
            self.n_actions,
            &mut report,
        ) {
            return report;
        }
        let tol = T::tol(ROW_SUM_TOL);
        for (a, rows) in self.transition_bounds.iter().enumerate() {
            for (s, row) in rows.iter().enumerate() {
                check_row_indices(row, a, s, self.n_states, &mut report);
                for &(q, iv) in row {
                    let at = Location::Entry {
                        action: a,
                        state: s,
                        to: q,
                    };
                    if iv.lo > iv.hi {
                        report.push(at, ViolationKind::IntervalInverted, format!("lo > hi in {iv}"));
                    }
                    if !(iv.lo >= T::zero() && iv.hi <= T::one()) {
                        report.push(
                            at,
                            ViolationKind::ProbabilityOutOfRange,
                            format!("probability bounds out of range: {iv}"),
                        );
                    }
                }
                let (sum_lo, sum_hi) = bound_sums(row);
                let at = Location::Row { action: a, state: s };
                if sum_lo > T::one() + tol {
                    report.push(
                        at,
                        ViolationKind::LowerSumExceedsOne,
                        format!("lower sum exceeds 1 ({sum_lo})"),
                    );
                }
                if !(sum_hi >= T::one() - tol) {
                    report.push(
                        at,
                        ViolationKind::UpperSumBelowOne,
                        format!("upper sum below 1 ({sum_hi})"),
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
            Err(Error::InvalidBmdp(report))
        }
    }

    /// The single-action BMDP obtained by fixing `policy`.
    pub fn restrict_to_policy(&self, policy: &Policy) -> Result<Self> {
        policy.check(self.n_states, self.n_actions)?;
        let rows = policy
            .iter()
            .enumerate()
            .map(|(p, &a)| self.transition_bounds[a][p].clone())
            .collect();
        Ok(Self::new(
            self.n_states,
            1,
            self.discount,
            self.reward_bounds.clone(),
            vec![rows],
        ))
    }

    /// Largest transition-interval width over all entries.
    pub fn max_transition_width(&self) -> T {
        self.transition_bounds
            .iter()
            .flatten()
            .flatten()
            .fold(T::zero(), |acc, (_, iv)| acc.max(iv.width()))
    }

    pub fn max_reward_width(&self) -> T {
        self.reward_bounds
            .iter()
            .fold(T::zero(), |acc, iv| acc.max(iv.width()))
    }
}

pub(crate) fn bound_sums<T: Scalar>(row: &[(usize, Interval<T>)]) -> (T, T) {
    row.iter().fold((T::zero(), T::zero()), |(lo, hi), (_, iv)| {
        (lo + iv.lo, hi + iv.hi)
    })
}

/// Embeds an exact MDP as a BMDP with degenerate intervals.
pub fn point_bmdp<T: Scalar>(m: &ExplicitMdp<T>) -> Result<Bmdp<T>> {
    m.ensure_valid()?;
    let rewards = m.rewards().iter().map(|&r| Interval::point(r)).collect();
    let rows = m
        .transitions()
        .iter()
        .map(|rows| {
            rows.iter()
                .map(|row| row.iter().map(|&(q, p)| (q, Interval::point(p))).collect())
                .collect()
        })
        .collect();
    Ok(Bmdp::new(
        m.n_states(),
        m.n_actions(),
        m.discount(),
        rewards,
        rows,
    ))
}

fn check_same_shape<T: Scalar>(b: &Bmdp<T>, m: &ExplicitMdp<T>) -> Result<()> {
    if b.n_states() != m.n_states() || b.n_actions() != m.n_actions() {
        return Err(Error::ShapeMismatch(format!(
            "BMDP has {}x{} states x actions, MDP has {}x{}",
            b.n_states(),
            b.n_actions(),
            m.n_states(),
            m.n_actions()
        )));
    }
    if b.discount() != m.discount() {
        return Err(Error::ShapeMismatch(format!(
            "discount {} differs from {}",
            b.discount(),
            m.discount()
        )));
    }
    Ok(())
}

/// Whether `m` belongs to the family of exact MDPs bounded by `b`.
pub fn contains_member<T: Scalar>(b: &Bmdp<T>, m: &ExplicitMdp<T>) -> Result<bool> {
    check_same_shape(b, m)?;
    let tol = T::tol(EQ_TOL);
    let rewards_ok = b
        .reward_bounds()
        .iter()
        .zip(m.rewards())
        .all(|(iv, &r)| iv.contains(r, tol));
    if !rewards_ok {
        return Ok(false);
    }
    for a in 0..m.n_actions() {
        for p in 0..m.n_states() {
            if !row_within(b.row(a, p), m.row(a, p), tol) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Merge-walks both sorted rows; entries missing on either side are zero.
fn row_within<T: Scalar>(bounds: &[(usize, Interval<T>)], row: &[(usize, T)], tol: T) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < bounds.len() || j < row.len() {
        let bq = bounds.get(i).map(|e| e.0).unwrap_or(usize::MAX);
        let rq = row.get(j).map(|e| e.0).unwrap_or(usize::MAX);
        let (iv, x) = if bq == rq {
            i += 1;
            j += 1;
            (bounds[i - 1].1, row[j - 1].1)
        } else if bq < rq {
            i += 1;
            (bounds[i - 1].1, T::zero())
        } else {
            j += 1;
            (Interval::zero(), row[j - 1].1)
        };
        if !iv.contains(x, tol) {
            return false;
        }
    }
    true
}

/// Draws a member of the family of `b`, deterministically in `seed`.
///
/// Each transition entry is drawn uniformly inside its interval and every row
/// is then repaired to sum to one by moving entries proportionally toward
/// their lower (or upper) bounds. Rewards are interval midpoints.
pub fn sample_member<T: Scalar>(b: &Bmdp<T>, seed: u64) -> Result<ExplicitMdp<T>> {
    b.ensure_valid()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rewards = b.reward_bounds().iter().map(Interval::midpoint).collect();
    let rows = b
        .transition_bounds()
        .iter()
        .map(|rows| {
            rows.iter()
                .map(|row| sample_row(row, &mut rng))
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(ExplicitMdp::new(
        b.n_states(),
        b.n_actions(),
        b.discount(),
        rewards,
        rows,
    ))
}

fn sample_row<T: Scalar>(row: &[(usize, Interval<T>)], rng: &mut impl Rng) -> Row<T> {
    let mut values: Vec<T> = row
        .iter()
        .map(|(_, iv)| {
            let u: f64 = rng.gen();
            if iv.lo == iv.hi {
                iv.lo
            } else {
                (iv.lo + iv.width() * T::lit(u)).min(iv.hi)
            }
        })
        .collect();
    let bounds: Vec<Interval<T>> = row.iter().map(|&(_, iv)| iv).collect();
    repair_to_unit_sum(&mut values, &bounds);
    row.iter().map(|&(q, _)| q).zip(values).collect()
}

/// Moves `values` inside `bounds` until they sum to one. Feasible whenever
/// `Σ lo ≤ 1 ≤ Σ hi`.
pub(crate) fn repair_to_unit_sum<T: Scalar>(values: &mut [T], bounds: &[Interval<T>]) {
    for _ in 0..values.len().max(1) {
        let sum: T = values.iter().copied().sum();
        let excess = sum - T::one();
        if excess == T::zero() {
            return;
        }
        let slack: Vec<T> = if excess > T::zero() {
            values.iter().zip(bounds).map(|(&x, iv)| x - iv.lo).collect()
        } else {
            values.iter().zip(bounds).map(|(&x, iv)| iv.hi - x).collect()
        };
        let total: T = slack.iter().copied().sum();
        if total <= T::zero() {
            return;
        }
        let factor = (excess.abs() / total).min(T::one());
        for ((x, s), iv) in values.iter_mut().zip(&slack).zip(bounds) {
            let moved = if excess > T::zero() {
                *x - *s * factor
            } else {
                *x + *s * factor
            };
            *x = moved.max(iv.lo).min(iv.hi);
        }
    }
}
