//! Random instance generation, brute-force oracles, ε-sweeps and soundness
//! sampling.
//!
//! The oracles here are deliberately naive (dense linear solves, exhaustive
//! enumeration) so that they share no code paths with the solvers they check.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::factored::{reduce_factored, DecisionTree, FactoredMdp, DEFAULT_REGION_CAP, MAX_VARIABLES};
use crate::interval::{sample_member, Bmdp, Interval};
use crate::io::format_real;
use crate::ivi::{ivi_bound_optimal, Extremum};
use crate::mdp::{policy_evaluate, value_iterate, ExplicitMdp, Policy};
use crate::reduction::{induce_bmdp, lift_block_function, reduce_model, Partition};
use crate::scalar::{Scalar, EQ_TOL};

/// Largest model the partition-enumerating oracle accepts.
pub const ORACLE_MAX_STATES: usize = 6;

/// Deterministic random source used by every generator in this module.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Parameters for [`generate_factored_mdp`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_variables: usize,
    pub n_actions: usize,
    pub max_depth: usize,
    /// CPT leaves are multiples of this step.
    pub quantization: f64,
    /// Reward leaves are `lo + k·quantization·(hi − lo)`.
    pub reward_range: (f64, f64),
    /// Probability that a CPT leaf is exactly 0 or 1. Keeps expansions of
    /// larger models sparse.
    pub deterministic_fraction: f64,
    /// With `Some(k)` the reward and the CPTs of `x0..x{k-1}` test only those
    /// variables, so the remaining ones are irrelevant.
    pub relevant_variables: Option<usize>,
    pub discount: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_variables: 6,
            n_actions: 2,
            max_depth: 2,
            quantization: 0.05,
            reward_range: (0.0, 1.0),
            deterministic_fraction: 0.0,
            relevant_variables: None,
            discount: 0.9,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_variables == 0 || self.n_variables > MAX_VARIABLES {
            return bad(format!("n_variables must be in 1..={MAX_VARIABLES}, got {}", self.n_variables));
        }
        if self.n_actions == 0 {
            return bad("n_actions must be positive".into());
        }
        if self.max_depth > self.n_variables {
            return bad(format!(
                "max_depth {} exceeds n_variables {}",
                self.max_depth, self.n_variables
            ));
        }
        if !(self.quantization > 0.0 && self.quantization <= 1.0) {
            return bad(format!("quantization must be in (0, 1], got {}", self.quantization));
        }
        let (lo, hi) = self.reward_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad(format!("invalid reward range [{lo}, {hi}]"));
        }
        if let Some(k) = self.relevant_variables {
            if k == 0 || k > self.n_variables {
                return bad(format!("relevant_variables must be in 1..={}, got {k}", self.n_variables));
            }
        }
        if !(0.0..=1.0).contains(&self.deterministic_fraction) {
            return bad(format!(
                "deterministic_fraction must be in [0, 1], got {}",
                self.deterministic_fraction
            ));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return bad(format!("discount must be in [0, 1), got {}", self.discount));
        }
        Ok(())
    }
}

/// Random factored MDP with decision-tree CPTs of bounded depth and leaves on
/// a quantized grid. Deterministic in `cfg`.
pub fn generate_factored_mdp<T: Scalar>(cfg: &GeneratorConfig) -> Result<FactoredMdp<T>> {
    cfg.validate()?;
    let mut rng = rng(cfg.seed);
    let steps = (1.0 / cfg.quantization).floor() as u64;
    let variables = (0..cfg.n_variables).map(|i| format!("x{i}")).collect();
    let actions = (0..cfg.n_actions).map(|i| format!("a{i}")).collect();
    let mut cpts = Vec::with_capacity(cfg.n_actions);
    for _ in 0..cfg.n_actions {
        let mut trees = Vec::with_capacity(cfg.n_variables);
        for var in 0..cfg.n_variables {
            let scope = match cfg.relevant_variables {
                Some(k) if var < k => k,
                _ => cfg.n_variables,
            };
            let mut leaf = |rng: &mut ChaCha8Rng| {
                let p = if rng.gen_bool(cfg.deterministic_fraction) {
                    if rng.gen_bool(0.5) {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (rng.gen_range(0..=steps) as f64 * cfg.quantization).min(1.0)
                };
                T::lit(p)
            };
            trees.push(random_tree(&mut rng, cfg, scope, &mut Vec::new(), &mut leaf));
        }
        cpts.push(trees);
    }
    let (lo, hi) = cfg.reward_range;
    let mut reward_leaf = |rng: &mut ChaCha8Rng| {
        let k = rng.gen_range(0..=steps) as f64;
        T::lit((lo + k * cfg.quantization * (hi - lo)).min(hi))
    };
    let scope = cfg.relevant_variables.unwrap_or(cfg.n_variables);
    let reward = random_tree(&mut rng, cfg, scope, &mut Vec::new(), &mut reward_leaf);
    FactoredMdp::new(variables, actions, T::lit(cfg.discount), cpts, reward)
}

fn random_tree<T: Scalar>(
    rng: &mut ChaCha8Rng,
    cfg: &GeneratorConfig,
    scope: usize,
    path: &mut Vec<usize>,
    leaf: &mut impl FnMut(&mut ChaCha8Rng) -> T,
) -> DecisionTree<T> {
    if path.len() >= cfg.max_depth.min(scope) || rng.gen_bool(0.3) {
        return DecisionTree::leaf(leaf(rng));
    }
    let free: Vec<usize> = (0..scope).filter(|v| !path.contains(v)).collect();
    let var = free[rng.gen_range(0..free.len())];
    path.push(var);
    let high = random_tree(rng, cfg, scope, path, leaf);
    let low = random_tree(rng, cfg, scope, path, leaf);
    path.pop();
    DecisionTree::node(var, high, low)
}

/// Random explicit MDP whose rewards come from `{0, 0.5, 1}` and whose
/// transition probabilities are multiples of `quantum`, so that exact and
/// near-exact bisimilarities occur often.
pub fn random_mdp<T: Scalar>(
    rng: &mut impl Rng,
    n_states: usize,
    n_actions: usize,
    discount: f64,
    quantum: f64,
) -> ExplicitMdp<T> {
    let units = (1.0 / quantum).round().max(1.0) as usize;
    let rewards = (0..n_states)
        .map(|_| T::lit(rng.gen_range(0..3) as f64 * 0.5))
        .collect();
    let transitions = (0..n_actions)
        .map(|_| {
            (0..n_states)
                .map(|_| {
                    let mut mass = vec![0usize; n_states];
                    let support = rng.gen_range(1..=n_states.min(3));
                    let targets: Vec<usize> = (0..support).map(|_| rng.gen_range(0..n_states)).collect();
                    for _ in 0..units {
                        mass[targets[rng.gen_range(0..targets.len())]] += 1;
                    }
                    mass.iter()
                        .enumerate()
                        .filter(|(_, &k)| k > 0)
                        .map(|(q, &k)| (q, T::lit(k as f64 / units as f64)))
                        .collect()
                })
                .collect()
        })
        .collect();
    ExplicitMdp::new(n_states, n_actions, T::lit(discount), rewards, transitions)
}

/// Random well-formed BMDP: a random MDP whose entries and rewards are
/// widened by up to `max_width / 2` on each side (clamped to `[0, 1]` for
/// probabilities), plus occasional `[0, w]` entries for absent successors.
pub fn random_bmdp<T: Scalar>(
    rng: &mut impl Rng,
    n_states: usize,
    n_actions: usize,
    discount: f64,
    max_width: f64,
) -> Bmdp<T> {
    let center = random_mdp::<f64>(rng, n_states, n_actions, discount, 0.1);
    let half = max_width / 2.0;
    let rewards = center
        .rewards()
        .iter()
        .map(|&r| {
            let (a, b) = (rng.gen_range(0.0..=half), rng.gen_range(0.0..=half));
            Interval::new(T::lit(r - a), T::lit(r + b))
        })
        .collect();
    let rows = center
        .transitions()
        .iter()
        .map(|rows| {
            rows.iter()
                .map(|row| {
                    let mut out = Vec::new();
                    for q in 0..n_states {
                        let p = row.iter().find(|e| e.0 == q).map(|e| e.1);
                        let iv = match p {
                            Some(p) => {
                                let lo = (p - rng.gen_range(0.0..=half)).max(0.0);
                                let hi = (p + rng.gen_range(0.0..=half)).min(1.0);
                                Interval::new(T::lit(lo), T::lit(hi))
                            }
                            None if rng.gen_bool(0.3) => {
                                Interval::new(T::zero(), T::lit(rng.gen_range(0.0..=max_width)))
                            }
                            None => continue,
                        };
                        out.push((q, iv));
                    }
                    out
                })
                .collect()
        })
        .collect();
    Bmdp::new(n_states, n_actions, T::lit(discount), rewards, rows)
}

/// Random interval row over successors `0..k` (`1 ≤ k ≤ max_successors`)
/// with `Σ lo ≤ 1 ≤ Σ hi`: intervals grown around a random distribution.
pub fn random_interval_row<T: Scalar>(
    rng: &mut impl Rng,
    max_successors: usize,
) -> Vec<(usize, Interval<T>)> {
    let k = rng.gen_range(1..=max_successors.max(1));
    let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
    let total: f64 = weights.iter().sum();
    weights
        .iter()
        .enumerate()
        .map(|(q, w)| {
            let x = w / total;
            let lo = x * (1.0 - rng.gen_range(0.0..1.0));
            let hi = (x + (1.0 - x) * rng.gen_range(0.0..1.0)).min(1.0);
            (q, Interval::new(T::lit(lo), T::lit(hi)))
        })
        .collect()
}

/// Solves `a·x = b` by LU decomposition (in `f64`).
pub fn solve_dense<T: Scalar>(a: Vec<Vec<T>>, b: Vec<T>) -> Result<Vec<T>> {
    let n = b.len();
    if a.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(Error::ShapeMismatch("system is not square".into()));
    }
    let matrix = DMatrix::from_fn(n, n, |i, j| a[i][j].as_f64());
    let rhs = DVector::from_iterator(n, b.iter().map(|x| x.as_f64()));
    let x = matrix
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvariantViolated("singular linear system".into()))?;
    Ok(x.iter().map(|&v| T::lit(v)).collect())
}

/// Exact value of `policy` from the linear system `(I − γ P_π) V = R`.
pub fn policy_value_exact<T: Scalar>(m: &ExplicitMdp<T>, policy: &Policy) -> Result<Vec<T>> {
    m.ensure_valid()?;
    policy.check(m.n_states(), m.n_actions())?;
    let n = m.n_states();
    let mut a = vec![vec![T::zero(); n]; n];
    for (p, row) in a.iter_mut().enumerate() {
        row[p] = T::one();
        for &(q, pr) in m.row(policy[p], p) {
            row[q] = row[q] - m.discount() * pr;
        }
    }
    solve_dense(a, m.rewards().to_vec())
}

/// Optimal values by enumerating every deterministic policy and taking the
/// pointwise maximum of their exact values.
pub fn brute_force_optimal<T: Scalar>(m: &ExplicitMdp<T>) -> Result<Vec<T>> {
    let mut best = vec![T::neg_infinity(); m.n_states()];
    for policy in Policy::enumerate(m.n_states(), m.n_actions()) {
        let v = policy_value_exact(m, &policy)?;
        for (b, x) in best.iter_mut().zip(v) {
            *b = b.max(x);
        }
    }
    Ok(best)
}

/// Optimal values by Howard policy iteration, with policies evaluated by
/// Gauss-Seidel sweeps until successive sweeps agree to `1e-13` (dense solve
/// for models of at most 64 states).
pub fn policy_iteration_oracle<T: Scalar>(m: &ExplicitMdp<T>) -> Result<(Vec<T>, Policy)> {
    m.ensure_valid()?;
    let n = m.n_states();
    let mut policy = Policy::constant(n, 0);
    let mut values = vec![T::zero(); n];
    for _ in 0..10_000 {
        if n <= 64 {
            values = policy_value_exact(m, &policy)?;
        } else {
            gauss_seidel(m, &policy, &mut values)?;
        }
        let mut changed = false;
        for p in 0..n {
            let current = m.q_value(p, policy[p], &values);
            for a in 0..m.n_actions() {
                if m.q_value(p, a, &values) > current + T::tol(1e-12) * (T::one() + current.abs()) {
                    policy.0[p] = a;
                    changed = true;
                    break;
                }
            }
        }
        if !changed {
            return Ok((values, policy));
        }
    }
    Err(Error::NotConverged(10_000))
}

fn gauss_seidel<T: Scalar>(m: &ExplicitMdp<T>, policy: &Policy, values: &mut [T]) -> Result<()> {
    let limit = T::tol(1e-13);
    for _ in 0..crate::mdp::MAX_ITERATIONS {
        let mut delta = T::zero();
        for p in 0..m.n_states() {
            let v = m.q_value(p, policy[p], values);
            delta = delta.max((v - values[p]).abs());
            values[p] = v;
        }
        if delta <= limit {
            return Ok(());
        }
    }
    Err(Error::NotConverged(crate::mdp::MAX_ITERATIONS))
}

/// Optimum of `Σ x_q·values[q]` over `{x : lo ≤ x ≤ hi, Σ x = 1}` by
/// enumerating polytope vertices: every vertex has at most one coordinate
/// strictly inside its interval.
pub fn extreme_row_vertex_oracle<T: Scalar>(
    row: &[(usize, Interval<T>)],
    values: &[T],
    mode: Extremum,
) -> Option<T> {
    let n = row.len();
    if n >= 32 {
        return None;
    }
    let tol = T::tol(1e-12);
    let mut best: Option<T> = None;
    for free in 0..n {
        for mask in 0u32..(1 << n) {
            if mask & (1 << free) != 0 {
                continue;
            }
            let mut x: Vec<T> = row
                .iter()
                .enumerate()
                .map(|(i, (_, iv))| if mask & (1 << i) != 0 { iv.hi } else { iv.lo })
                .collect();
            let others: T = x.iter().enumerate().filter(|(i, _)| *i != free).map(|(_, v)| *v).sum();
            let rest = T::one() - others;
            let iv = row[free].1;
            if rest < iv.lo - tol || rest > iv.hi + tol {
                continue;
            }
            x[free] = rest;
            let objective: T = row.iter().zip(&x).map(|((q, _), xi)| *xi * values[*q]).sum();
            best = Some(match (best, mode) {
                (None, _) => objective,
                (Some(b), Extremum::Minimize) => b.min(objective),
                (Some(b), Extremum::Maximize) => b.max(objective),
            });
        }
    }
    best
}

/// Direct ε-homogeneity test: rewards within a block and, for every action
/// and every block, the probabilities of entering it vary by at most
/// `ε + 1e-12` across the block.
pub fn is_epsilon_homogeneous<T: Scalar>(m: &ExplicitMdp<T>, blocks: &[Vec<usize>], epsilon: T) -> bool {
    let limit = epsilon + T::tol(EQ_TOL);
    let within = |xs: &[T]| {
        let lo = xs.iter().copied().fold(T::infinity(), T::min);
        let hi = xs.iter().copied().fold(T::neg_infinity(), T::max);
        hi - lo <= limit
    };
    for block in blocks {
        let rewards: Vec<T> = block.iter().map(|&p| m.reward(p)).collect();
        if !within(&rewards) {
            return false;
        }
        for a in 0..m.n_actions() {
            for target in blocks {
                let probs: Vec<T> = block
                    .iter()
                    .map(|&p| target.iter().map(|&q| m.prob(a, p, q)).sum())
                    .collect();
                if !within(&probs) {
                    return false;
                }
            }
        }
    }
    true
}

/// Every set partition of `0..n` as block lists, via restricted growth strings.
pub fn enumerate_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut labels = vec![0usize; n];
    fn go(i: usize, max: usize, labels: &mut Vec<usize>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == labels.len() {
            let count = if labels.is_empty() { 0 } else { max + 1 };
            let mut blocks = vec![Vec::new(); count];
            for (s, &l) in labels.iter().enumerate() {
                blocks[l].push(s);
            }
            out.push(blocks);
            return;
        }
        let top = if i == 0 { 0 } else { max + 1 };
        for l in 0..=top {
            labels[i] = l;
            go(i + 1, max.max(l), labels, out);
        }
    }
    go(0, 0, &mut labels, &mut out);
    out
}

/// A coarsest ε-homogeneous partition by exhaustive enumeration: fewest
/// blocks, ties broken by the lexicographically smallest block list (blocks
/// ordered by smallest state).
pub fn coarsest_homogeneous_oracle<T: Scalar>(m: &ExplicitMdp<T>, epsilon: T) -> Result<Partition> {
    m.ensure_valid()?;
    if m.n_states() > ORACLE_MAX_STATES {
        return Err(Error::TooManyStates {
            n: m.n_states(),
            max: ORACLE_MAX_STATES,
        });
    }
    let best = enumerate_partitions(m.n_states())
        .into_iter()
        .filter(|blocks| is_epsilon_homogeneous(m, blocks, epsilon))
        .min_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)))
        .expect("the singleton partition is always homogeneous");
    Partition::new(m.n_states(), best)
}

/// Exhaustive coarsest ε-uniform clustering of at most 10 vectors: fewest
/// clusters such that every cluster spans at most `ε + 1e-12` per coordinate.
pub fn coarsest_clustering_oracle<T: Scalar>(items: &[Vec<T>], epsilon: T) -> Result<usize> {
    if items.len() > 10 {
        return Err(Error::TooManyStates {
            n: items.len(),
            max: 10,
        });
    }
    let limit = epsilon + T::tol(EQ_TOL);
    let dims = items.first().map_or(0, Vec::len);
    let fits = |block: &[usize]| {
        (0..dims).all(|d| {
            let xs = block.iter().map(|&i| items[i][d]);
            let lo = xs.clone().fold(T::infinity(), T::min);
            let hi = xs.fold(T::neg_infinity(), T::max);
            hi - lo <= limit
        })
    };
    Ok(enumerate_partitions(items.len())
        .into_iter()
        .filter(|blocks| blocks.iter().all(|b| fits(b)))
        .map(|blocks| blocks.len())
        .min()
        .unwrap_or(0))
}

/// Settings shared by [`epsilon_sweep_with`] runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub tol: f64,
    pub region_cap: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            region_cap: DEFAULT_REGION_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub blocks: usize,
    pub max_transition_width: f64,
    pub max_reward_width: f64,
    pub mean_bound_width: f64,
    /// `upper − lower` of the IVI bounds, per block.
    pub block_bound_widths: Vec<f64>,
    pub used_explicit_fallback: bool,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Block count of the ε = 0 reduction every row was checked against.
    pub exact_blocks: usize,
}

impl SweepReport {
    /// Comma-separated table with a header row; per-block widths are joined
    /// with `;`. Wall time is included only when `timing` is set, so the
    /// default output is reproducible byte for byte.
    pub fn to_csv(&self, timing: bool) -> String {
        let mut out = String::from(
            "epsilon,blocks,max_transition_width,max_reward_width,mean_bound_width,block_bound_widths",
        );
        if timing {
            out.push_str(",wall_time_s");
        }
        out.push('\n');
        for r in &self.rows {
            let widths: Vec<String> = r.block_bound_widths.iter().map(|&w| format_real(w, 10)).collect();
            let _ = write!(
                out,
                "{},{},{},{},{},{}",
                format_real(r.epsilon, 10),
                r.blocks,
                format_real(r.max_transition_width, 10),
                format_real(r.max_reward_width, 10),
                format_real(r.mean_bound_width, 10),
                widths.join(";")
            );
            if timing {
                let _ = write!(out, ",{:.6}", r.wall_time.as_secs_f64());
            }
            out.push('\n');
        }
        out
    }
}

pub fn epsilon_sweep<T: Scalar>(f: &FactoredMdp<T>, epsilons: &[f64]) -> Result<SweepReport> {
    epsilon_sweep_with(f, epsilons, SweepOptions::default())
}

/// Reduces `f` at each ε (rows in input order) and bounds the reduced model
/// with IVI. Fails if a row exceeds the block count at ε = 0 or has an
/// interval wider than its ε.
pub fn epsilon_sweep_with<T: Scalar>(
    f: &FactoredMdp<T>,
    epsilons: &[f64],
    options: SweepOptions,
) -> Result<SweepReport> {
    for &e in epsilons {
        if !(0.0..1.0).contains(&e) {
            return Err(Error::EpsilonOutOfRange(e));
        }
    }
    let tol = T::lit(options.tol);
    let exact_blocks = reduce_factored(f, T::zero(), options.region_cap)?.blocks.len();
    let mut rows = Vec::with_capacity(epsilons.len());
    for &epsilon in epsilons {
        let start = Instant::now();
        let reduction = reduce_factored(f, T::lit(epsilon), options.region_cap)?;
        let bounds = ivi_bound_optimal(&reduction.bmdp, tol)?;
        let wall_time = start.elapsed();
        let block_bound_widths: Vec<f64> = bounds.widths().into_iter().map(Scalar::as_f64).collect();
        let row = SweepRow {
            epsilon,
            blocks: reduction.blocks.len(),
            max_transition_width: reduction.bmdp.max_transition_width().as_f64(),
            max_reward_width: reduction.bmdp.max_reward_width().as_f64(),
            mean_bound_width: block_bound_widths.iter().sum::<f64>() / block_bound_widths.len().max(1) as f64,
            block_bound_widths,
            used_explicit_fallback: reduction.used_explicit_fallback,
            wall_time,
        };
        if row.blocks > exact_blocks {
            return Err(Error::InvariantViolated(format!(
                "{} blocks at epsilon {epsilon} exceed {exact_blocks} blocks at epsilon 0",
                row.blocks
            )));
        }
        let limit = epsilon + T::tol(EQ_TOL).as_f64();
        if row.max_transition_width > limit || row.max_reward_width > limit {
            return Err(Error::InvariantViolated(format!(
                "interval wider than epsilon {epsilon} in reduced model"
            )));
        }
        rows.push(row);
    }
    Ok(SweepReport { rows, exact_blocks })
}

/// Outcome of [`soundness_report`]. Violations are amounts by which a bound
/// was exceeded (zero when sound).
#[derive(Debug, Clone, PartialEq)]
pub struct SoundnessReport {
    pub epsilon: f64,
    pub blocks: usize,
    /// Optimal values of the model outside the lifted bounds.
    pub bracket_violation: f64,
    /// Shortfall of the lifted pessimistic policy below the lifted lower bound.
    pub policy_violation: f64,
    /// Optimal values of sampled family members outside the block bounds.
    pub member_violation: f64,
    pub samples: usize,
    pub max_bound_width: f64,
    pub mean_bound_width: f64,
}

impl SoundnessReport {
    pub fn max_violation(&self) -> f64 {
        self.bracket_violation
            .max(self.policy_violation)
            .max(self.member_violation)
    }
}

/// Reduces `m` at ε, bounds the reduced model with IVI, and measures how far
/// the model's optimal values, the lifted pessimistic policy and sampled
/// family members stray from the bounds.
pub fn soundness_report<T: Scalar>(
    m: &ExplicitMdp<T>,
    epsilon: T,
    n_samples: usize,
    seed: u64,
) -> Result<SoundnessReport> {
    if m.n_states() > 1 << 16 {
        return Err(Error::TooManyStates {
            n: m.n_states(),
            max: 1 << 16,
        });
    }
    let tol = T::tol(1e-9);
    let (partition, _) = reduce_model(m, epsilon)?;
    let b = induce_bmdp(m, &partition)?;
    let bounds = ivi_bound_optimal(&b, tol)?;
    let lower = lift_block_function(&partition, &bounds.lower)?;
    let upper = lift_block_function(&partition, &bounds.upper)?;
    let policy = Policy(lift_block_function(&partition, &bounds.pessimistic_policy)?);

    let (optimal, _) = value_iterate(m, tol)?;
    let bracket_violation = outside(&optimal, &lower, &upper);
    let achieved = policy_evaluate(m, &policy, tol)?;
    let policy_violation = lower
        .iter()
        .zip(achieved.iter())
        .map(|(&l, &v)| (l - v).as_f64())
        .fold(0.0, f64::max);

    let mut member_violation: f64 = 0.0;
    for i in 0..n_samples {
        let member = sample_member(&b, seed.wrapping_add(i as u64))?;
        let (v, _) = value_iterate(&member, tol)?;
        member_violation = member_violation.max(outside(&v, &bounds.lower, &bounds.upper));
    }
    let widths: Vec<f64> = bounds.widths().into_iter().map(Scalar::as_f64).collect();
    Ok(SoundnessReport {
        epsilon: epsilon.as_f64(),
        blocks: partition.len(),
        bracket_violation,
        policy_violation,
        member_violation,
        samples: n_samples,
        max_bound_width: widths.iter().copied().fold(0.0, f64::max),
        mean_bound_width: widths.iter().sum::<f64>() / widths.len().max(1) as f64,
    })
}

fn outside<T: Scalar>(values: &[T], lower: &[T], upper: &[T]) -> f64 {
    values
        .iter()
        .zip(lower.iter().zip(upper))
        .map(|(&v, (&l, &u))| (l - v).max(v - u).as_f64())
        .fold(0.0, f64::max)
}
