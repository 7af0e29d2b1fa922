//! Explicit-state ε-reduction: partition refinement of a flat MDP into
//! ε-homogeneous blocks and induction of the block-level BMDP.

use std::cmp::Ordering;
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::interval::{Bmdp, Interval, IntervalRow};
use crate::mdp::ExplicitMdp;
use crate::scalar::{Scalar, EQ_TOL};

/// A disjoint cover of `0..n_states` by nonempty blocks.
///
/// Blocks are kept canonical: states ascending within a block and blocks
/// ordered by their smallest state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
}

impl Partition {
    pub fn new(n_states: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        for b in blocks.iter_mut() {
            b.sort_unstable();
        }
        if let Some(i) = blocks.iter().position(Vec::is_empty) {
            return Err(Error::NotAPartition(format!("block {i} is empty")));
        }
        blocks.sort_by_key(|b| b[0]);
        let mut block_of = vec![usize::MAX; n_states];
        for (i, block) in blocks.iter().enumerate() {
            for &s in block {
                if s >= n_states {
                    return Err(Error::NotAPartition(format!(
                        "state {s} out of range for {n_states} states"
                    )));
                }
                if block_of[s] != usize::MAX {
                    return Err(Error::NotAPartition(format!("state {s} appears twice")));
                }
                block_of[s] = i;
            }
        }
        if let Some(s) = block_of.iter().position(|&b| b == usize::MAX) {
            return Err(Error::NotAPartition(format!("state {s} is not covered")));
        }
        Ok(Self { blocks, block_of })
    }

    /// Builds a partition from a block label per state.
    pub fn from_labels(labels: &[usize]) -> Self {
        let n_labels = labels.iter().max().map_or(0, |&l| l + 1);
        let mut blocks = vec![Vec::new(); n_labels];
        for (s, &l) in labels.iter().enumerate() {
            blocks[l].push(s);
        }
        blocks.retain(|b| !b.is_empty());
        Self::new(labels.len(), blocks).expect("labels always describe a partition")
    }

    pub fn singletons(n_states: usize) -> Self {
        Self::from_labels(&(0..n_states).collect::<Vec<_>>())
    }

    pub fn single_block(n_states: usize) -> Self {
        Self::from_labels(&vec![0; n_states])
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &[usize] {
        &self.blocks[i]
    }

    pub fn block_of(&self, state: usize) -> usize {
        self.block_of[state]
    }

    pub fn labels(&self) -> &[usize] {
        &self.block_of
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.block_of.len()
    }

    /// Whether every block of `self` lies inside some block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.n_states() == coarser.n_states()
            && self.blocks.iter().all(|b| {
                let target = coarser.block_of(b[0]);
                b.iter().all(|&s| coarser.block_of(s) == target)
            })
    }
}

/// Groups real vectors so that every coordinate varies by at most `epsilon`
/// inside a group, and no two groups can be merged without breaking that.
///
/// Items are swept in lexicographic order into greedy groups, then groups are
/// merged pairwise until no merge is possible. Groups list item indices in
/// ascending order and are ordered by their smallest index.
pub fn cluster_epsilon_uniform<T: Scalar>(items: &[Vec<T>], epsilon: T) -> Result<Vec<Vec<usize>>> {
    if !(epsilon >= T::zero()) {
        return Err(Error::EpsilonOutOfRange(epsilon.as_f64()));
    }
    let limit = epsilon + T::tol(EQ_TOL);
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&i, &j| lex_cmp(&items[i], &items[j]).then(i.cmp(&j)));

    let mut clusters: Vec<Cluster<T>> = Vec::new();
    for i in order {
        match clusters.last_mut() {
            Some(c) if c.accepts(&items[i], limit) => c.push(i, &items[i]),
            _ => clusters.push(Cluster::new(i, &items[i])),
        }
    }

    loop {
        let mut merged = false;
        let mut i = 0;
        while i < clusters.len() {
            let mut j = i + 1;
            while j < clusters.len() {
                if clusters[i].merge_spread_ok(&clusters[j], limit) {
                    let other = clusters.remove(j);
                    clusters[i].absorb(other);
                    merged = true;
                } else {
                    j += 1;
                }
            }
            i += 1;
        }
        if !merged {
            break;
        }
    }

    let mut groups: Vec<Vec<usize>> = clusters
        .into_iter()
        .map(|mut c| {
            c.members.sort_unstable();
            c.members
        })
        .collect();
    groups.sort_by_key(|g| g[0]);
    Ok(groups)
}

fn lex_cmp<T: Scalar>(a: &[T], b: &[T]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y).unwrap_or(Ordering::Equal) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

struct Cluster<T> {
    members: Vec<usize>,
    min: Vec<T>,
    max: Vec<T>,
}

impl<T: Scalar> Cluster<T> {
    fn new(i: usize, item: &[T]) -> Self {
        Self {
            members: vec![i],
            min: item.to_vec(),
            max: item.to_vec(),
        }
    }

    fn accepts(&self, item: &[T], limit: T) -> bool {
        item.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(&x, (&lo, &hi))| hi.max(x) - lo.min(x) <= limit)
    }

    fn push(&mut self, i: usize, item: &[T]) {
        self.members.push(i);
        for ((lo, hi), &x) in self.min.iter_mut().zip(self.max.iter_mut()).zip(item) {
            *lo = lo.min(x);
            *hi = hi.max(x);
        }
    }

    fn merge_spread_ok(&self, other: &Self, limit: T) -> bool {
        (0..self.min.len())
            .all(|k| self.max[k].max(other.max[k]) - self.min[k].min(other.min[k]) <= limit)
    }

    fn absorb(&mut self, other: Self) {
        self.members.extend(other.members);
        for k in 0..self.min.len() {
            self.min[k] = self.min[k].min(other.min[k]);
            self.max[k] = self.max[k].max(other.max[k]);
        }
    }
}

/// Blocks of states with equal rewards (within `EQ_TOL`).
pub fn immediate_reward_partition<T: Scalar>(m: &ExplicitMdp<T>) -> Partition {
    let items: Vec<Vec<T>> = m.rewards().iter().map(|&r| vec![r]).collect();
    let groups = cluster_epsilon_uniform(&items, T::zero()).expect("zero epsilon is valid");
    Partition::new(m.n_states(), groups).expect("clusters cover every state")
}

/// `Σ_{r∈B} F_pr(α)` for a sorted block `B`.
pub fn block_transition_prob<T: Scalar>(
    m: &ExplicitMdp<T>,
    state: usize,
    action: usize,
    block: &[usize],
) -> T {
    m.row(action, state)
        .iter()
        .filter(|(q, _)| block.binary_search(q).is_ok())
        .fold(T::zero(), |acc, &(_, p)| acc + p)
}

/// Per-action probability of moving from `state` into `block`.
fn action_profile<T: Scalar>(m: &ExplicitMdp<T>, state: usize, block: &[usize]) -> Vec<T> {
    (0..m.n_actions())
        .map(|a| block_transition_prob(m, state, a, block))
        .collect()
}

/// Whether block `c` is ε-stable with respect to block `b`.
pub fn check_block_stability<T: Scalar>(
    m: &ExplicitMdp<T>,
    c: &[usize],
    b: &[usize],
    epsilon: T,
) -> bool {
    first_unstable_action(m, c, b, epsilon).is_none()
}

fn first_unstable_action<T: Scalar>(
    m: &ExplicitMdp<T>,
    c: &[usize],
    b: &[usize],
    epsilon: T,
) -> Option<usize> {
    let limit = epsilon + T::tol(EQ_TOL);
    (0..m.n_actions()).find(|&a| {
        let (lo, hi) = c.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &p| {
            let x = block_transition_prob(m, p, a, b);
            (lo.min(x), hi.max(x))
        });
        hi - lo > limit
    })
}

/// Splits `c` into maximal sub-blocks that are ε-stable with respect to `b`.
pub fn split_block<T: Scalar>(
    m: &ExplicitMdp<T>,
    c: &[usize],
    b: &[usize],
    epsilon: T,
) -> Result<Vec<Vec<usize>>> {
    let profiles: Vec<Vec<T>> = c.iter().map(|&p| action_profile(m, p, b)).collect();
    let groups = cluster_epsilon_uniform(&profiles, epsilon)?;
    Ok(groups
        .into_iter()
        .map(|g| g.into_iter().map(|i| c[i]).collect())
        .collect())
}

/// One refinement step: `block` was replaced by `parts` because it was not
/// ε-stable with respect to `witness` under `action`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitEvent<B> {
    pub pass: usize,
    pub block: B,
    pub witness: B,
    pub action: usize,
    pub parts: Vec<B>,
}

impl<B> SplitEvent<B> {
    pub fn part_count(&self) -> usize {
        self.parts.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionTrace<B, T> {
    pub initial: Vec<B>,
    pub events: Vec<SplitEvent<B>>,
    pub epsilon: T,
    pub passes: usize,
}

impl<T: Scalar> ReductionTrace<Vec<usize>, T> {
    /// Sub-block sizes produced by each split.
    pub fn split_sizes(&self) -> Vec<Vec<usize>> {
        self.events
            .iter()
            .map(|e| e.parts.iter().map(Vec::len).collect())
            .collect()
    }

    /// Re-applies every split to the initial partition.
    pub fn replay(&self, n_states: usize) -> Result<Partition> {
        let mut blocks = self.initial.clone();
        for e in &self.events {
            let i = blocks.iter().position(|b| *b == e.block).ok_or_else(|| {
                Error::InvariantViolated(format!("trace splits unknown block {:?}", e.block))
            })?;
            blocks.splice(i..=i, e.parts.iter().cloned());
        }
        Partition::new(n_states, blocks)
    }
}

fn check_epsilon<T: Scalar>(epsilon: T) -> Result<()> {
    if epsilon >= T::zero() && epsilon < T::one() {
        Ok(())
    } else {
        Err(Error::EpsilonOutOfRange(epsilon.as_f64()))
    }
}

/// Initial blocks: an ε-uniform clustering of the immediate reward partition.
fn reward_clustering<T: Scalar>(m: &ExplicitMdp<T>, epsilon: T) -> Result<Vec<Vec<usize>>> {
    let base = immediate_reward_partition(m);
    let items: Vec<Vec<T>> = base
        .blocks()
        .iter()
        .map(|b| vec![m.reward(b[0])])
        .collect();
    let groups = cluster_epsilon_uniform(&items, epsilon)?;
    Ok(groups
        .into_iter()
        .map(|g| {
            let mut block: Vec<usize> = g.iter().flat_map(|&i| base.block(i).to_vec()).collect();
            block.sort_unstable();
            block
        })
        .collect())
}

/// Refines the reward clustering until every block is ε-stable with respect
/// to every block.
///
/// Each pass walks the blocks present at the start of the pass in index
/// order and splits each of them against every block of that same snapshot;
/// a pass without splits ends the loop.
pub fn reduce_model<T: Scalar>(
    m: &ExplicitMdp<T>,
    epsilon: T,
) -> Result<(Partition, ReductionTrace<Vec<usize>, T>)> {
    m.ensure_valid()?;
    check_epsilon(epsilon)?;
    let initial = Partition::new(m.n_states(), reward_clustering(m, epsilon)?)?;
    let mut trace = ReductionTrace {
        initial: initial.blocks().to_vec(),
        events: Vec::new(),
        epsilon,
        passes: 0,
    };
    let mut blocks = initial.blocks().to_vec();
    let mut stable: HashSet<Vec<usize>> = HashSet::new();
    let mut previous: HashSet<Vec<usize>> = HashSet::new();
    loop {
        trace.passes += 1;
        let pass = trace.passes;
        let snapshot = blocks.clone();
        let mut next = Vec::with_capacity(snapshot.len());
        let mut changed = false;
        let mut unsplit = HashSet::new();
        for c in &snapshot {
            let mut pieces = vec![c.clone()];
            // A block that survived the previous pass whole is stable with
            // respect to every block of that pass.
            let settled = stable.contains(c);
            for b in &snapshot {
                if settled && previous.contains(b) {
                    continue;
                }
                let mut refined = Vec::with_capacity(pieces.len());
                for piece in pieces {
                    let Some(action) = first_unstable_action(m, &piece, b, epsilon) else {
                        refined.push(piece);
                        continue;
                    };
                    let parts = split_block(m, &piece, b, epsilon)?;
                    changed = true;
                    trace.events.push(SplitEvent {
                        pass,
                        block: piece,
                        witness: b.clone(),
                        action,
                        parts: parts.clone(),
                    });
                    refined.extend(parts);
                }
                pieces = refined;
            }
            if pieces.len() == 1 && &pieces[0] == c {
                unsplit.insert(c.clone());
            }
            next.extend(pieces);
        }
        stable = unsplit;
        previous = snapshot.into_iter().collect();
        let partition = Partition::new(m.n_states(), next)?;
        blocks = partition.blocks().to_vec();
        if !changed {
            return Ok((partition, trace));
        }
    }
}

/// Largest deviations from ε-homogeneity of a partition.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneityReport<T> {
    pub epsilon: T,
    pub max_reward_spread: T,
    pub max_transition_spread: T,
    /// `(block, witness block, action, spread)` for every spread above ε.
    pub violations: Vec<(usize, usize, usize, T)>,
    pub reward_violations: Vec<(usize, T)>,
}

impl<T: Scalar> HomogeneityReport<T> {
    pub fn is_homogeneous(&self) -> bool {
        self.violations.is_empty() && self.reward_violations.is_empty()
    }
}

/// Direct check that `partition` is ε-homogeneous for `m`: in every block,
/// rewards and all block-transition probabilities vary by at most ε.
pub fn verify_homogeneity<T: Scalar>(
    m: &ExplicitMdp<T>,
    partition: &Partition,
    epsilon: T,
) -> Result<HomogeneityReport<T>> {
    check_partition_of(m, partition)?;
    let limit = epsilon + T::tol(EQ_TOL);
    let mut report = HomogeneityReport {
        epsilon,
        max_reward_spread: T::zero(),
        max_transition_spread: T::zero(),
        violations: Vec::new(),
        reward_violations: Vec::new(),
    };
    let masses = block_masses(m, partition);
    for (i, block) in partition.blocks().iter().enumerate() {
        let spread = spread_of(block.iter().map(|&p| m.reward(p)));
        report.max_reward_spread = report.max_reward_spread.max(spread);
        if spread > limit {
            report.reward_violations.push((i, spread));
        }
        for a in 0..m.n_actions() {
            for j in 0..partition.len() {
                let spread = spread_of(block.iter().map(|&p| masses[a][p][j]));
                report.max_transition_spread = report.max_transition_spread.max(spread);
                if spread > limit {
                    report.violations.push((i, j, a, spread));
                }
            }
        }
    }
    Ok(report)
}

fn spread_of<T: Scalar>(xs: impl Iterator<Item = T>) -> T {
    let (lo, hi) = xs.fold((T::infinity(), T::neg_infinity()), |(lo, hi), x| {
        (lo.min(x), hi.max(x))
    });
    if lo > hi {
        T::zero()
    } else {
        hi - lo
    }
}

fn check_partition_of<T: Scalar>(m: &ExplicitMdp<T>, partition: &Partition) -> Result<()> {
    if partition.n_states() != m.n_states() {
        return Err(Error::NotAPartition(format!(
            "partition covers {} states, model has {}",
            partition.n_states(),
            m.n_states()
        )));
    }
    Ok(())
}

/// `masses[a][p][j]`: probability of moving from `p` into block `j` under `a`.
fn block_masses<T: Scalar>(m: &ExplicitMdp<T>, partition: &Partition) -> Vec<Vec<Vec<T>>> {
    (0..m.n_actions())
        .map(|a| {
            (0..m.n_states())
                .map(|p| {
                    let mut out = vec![T::zero(); partition.len()];
                    for &(q, pr) in m.row(a, p) {
                        let j = partition.block_of(q);
                        out[j] = out[j] + pr;
                    }
                    out
                })
                .collect()
        })
        .collect()
}

/// BMDP over the blocks of `partition` whose intervals are the min/max
/// rewards and block-transition probabilities over each block's members.
pub fn induce_bmdp<T: Scalar>(m: &ExplicitMdp<T>, partition: &Partition) -> Result<Bmdp<T>> {
    m.ensure_valid()?;
    check_partition_of(m, partition)?;
    let n = partition.len();
    let masses = block_masses(m, partition);
    let rewards = partition
        .blocks()
        .iter()
        .map(|block| {
            let (lo, hi) = min_max(block.iter().map(|&p| m.reward(p)));
            Interval::new(lo, hi)
        })
        .collect();
    let rows = (0..m.n_actions())
        .map(|a| {
            partition
                .blocks()
                .iter()
                .map(|block| {
                    (0..n)
                        .filter_map(|j| {
                            let (lo, hi) = min_max(block.iter().map(|&p| masses[a][p][j]));
                            (hi > T::zero()).then(|| (j, Interval::new(lo, hi)))
                        })
                        .collect::<IntervalRow<T>>()
                })
                .collect()
        })
        .collect();
    Ok(Bmdp::new(n, m.n_actions(), m.discount(), rewards, rows))
}

fn min_max<T: Scalar>(xs: impl Iterator<Item = T>) -> (T, T) {
    xs.fold((T::infinity(), T::neg_infinity()), |(lo, hi), x| {
        (lo.min(x), hi.max(x))
    })
}

/// Collapses a 0-homogeneous partition into the exact quotient MDP.
pub fn collapse_exact<T: Scalar>(m: &ExplicitMdp<T>, partition: &Partition) -> Result<ExplicitMdp<T>> {
    let b = induce_bmdp(m, partition)?;
    let tol = T::tol(EQ_TOL);
    let degenerate = b.reward_bounds().iter().all(|iv| iv.is_degenerate(tol))
        && b
            .transition_bounds()
            .iter()
            .flatten()
            .flatten()
            .all(|(_, iv)| iv.is_degenerate(tol));
    if !degenerate {
        return Err(Error::InvariantViolated(
            "partition is not 0-homogeneous".into(),
        ));
    }
    let rewards = b.reward_bounds().iter().map(|iv| iv.lo).collect();
    let rows = b
        .transition_bounds()
        .iter()
        .map(|rows| {
            rows.iter()
                .map(|row| row.iter().map(|&(q, iv)| (q, iv.lo)).collect())
                .collect()
        })
        .collect();
    ExplicitMdp::try_new(b.n_states(), b.n_actions(), b.discount(), rewards, rows)
}

/// Extends a per-block function (values, actions, ...) to every state.
pub fn lift_block_function<V: Clone>(partition: &Partition, per_block: &[V]) -> Result<Vec<V>> {
    if per_block.len() != partition.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} block values for {} blocks",
            per_block.len(),
            partition.len()
        )));
    }
    Ok(partition
        .labels()
        .iter()
        .map(|&b| per_block[b].clone())
        .collect())
}
