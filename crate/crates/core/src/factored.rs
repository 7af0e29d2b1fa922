//! Factored MDPs over boolean fluents: decision-tree CPTs, DNF block
//! formulas, and symbolic ε-reduction that never enumerates states.
//!
//! A state is a bit vector with fluent `i` stored in bit `i`, so the explicit
//! state index of a fluent assignment is its binary encoding with fluent 0 as
//! the least significant bit.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::interval::{Bmdp, Interval, IntervalRow};
use crate::mdp::{check_discount, ExplicitMdp, ValidationReport};
use crate::reduction::{
    cluster_epsilon_uniform, reduce_model, Partition, ReductionTrace, SplitEvent,
};
use crate::scalar::{Scalar, EQ_TOL};

/// Fluent assignment, fluent `i` in bit `i`.
pub type StateBits = u64;

/// Fluents a state word can hold.
pub const MAX_VARIABLES: usize = 64;
/// Largest model [`expand_to_explicit`] will enumerate.
pub const MAX_EXPAND_VARIABLES: usize = 20;
/// Default bound on the number of regions a symbolic split may create.
pub const DEFAULT_REGION_CAP: usize = 4096;

pub fn state_bits(fluents: &[bool]) -> StateBits {
    fluents
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &v)| if v { acc | (1 << i) } else { acc })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Literal {
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    pub fn pos(var: usize) -> Self {
        Self { var, positive: true }
    }

    pub fn neg(var: usize) -> Self {
        Self {
            var,
            positive: false,
        }
    }

    pub fn holds(&self, state: StateBits) -> bool {
        ((state >> self.var) & 1 == 1) == self.positive
    }

    fn negated(self) -> Self {
        Self {
            var: self.var,
            positive: !self.positive,
        }
    }
}

impl Ord for Literal {
    fn cmp(&self, other: &Self) -> Ordering {
        // Positive literal sorts before its negation.
        self.var
            .cmp(&other.var)
            .then(other.positive.cmp(&self.positive))
    }
}

impl PartialOrd for Literal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Consistent conjunction of literals, at most one per variable, sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Term(Vec<Literal>);

impl Term {
    /// The empty conjunction (all states).
    pub fn top() -> Self {
        Self(Vec::new())
    }

    /// `None` if the literals contradict each other.
    pub fn new(mut literals: Vec<Literal>) -> Option<Self> {
        literals.sort();
        literals.dedup();
        if literals.windows(2).any(|w| w[0].var == w[1].var) {
            return None;
        }
        Some(Self(literals))
    }

    pub fn literals(&self) -> &[Literal] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn value_of(&self, var: usize) -> Option<bool> {
        self.0
            .binary_search_by(|l| l.var.cmp(&var))
            .ok()
            .map(|i| self.0[i].positive)
    }

    pub fn holds(&self, state: StateBits) -> bool {
        self.0.iter().all(|l| l.holds(state))
    }

    /// `self ∧ other`, or `None` when inconsistent.
    pub fn conjoin(&self, other: &Term) -> Option<Term> {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a, b) = (self.0[i], other.0[j]);
            match a.var.cmp(&b.var) {
                Ordering::Less => {
                    out.push(a);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b);
                    j += 1;
                }
                Ordering::Equal => {
                    if a.positive != b.positive {
                        return None;
                    }
                    out.push(a);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Some(Term(out))
    }

    pub fn with(&self, lit: Literal) -> Option<Term> {
        self.conjoin(&Term(vec![lit]))
    }

    /// Canonical satisfying state: bound fluents as given, the rest false.
    pub fn representative(&self) -> StateBits {
        self.0
            .iter()
            .filter(|l| l.positive)
            .fold(0, |acc, l| acc | (1 << l.var))
    }

    fn is_subset_of(&self, other: &Term) -> bool {
        self.0.iter().all(|l| other.value_of(l.var) == Some(l.positive))
    }

    /// `self ∧ ¬other` as disjoint terms.
    fn minus(&self, other: &Term) -> Vec<Term> {
        if self.conjoin(other).is_none() {
            return vec![self.clone()];
        }
        let mut out = Vec::new();
        let mut prefix = self.clone();
        for &lit in &other.0 {
            if prefix.value_of(lit.var).is_some() {
                continue;
            }
            if let Some(t) = prefix.with(lit.negated()) {
                out.push(t);
            }
            prefix = prefix.with(lit).expect("variable unbound in prefix");
        }
        out
    }
}

/// A set of states as a disjunction of terms. No terms is the empty set; a
/// single empty term is every state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BlockFormula {
    terms: Vec<Term>,
}

impl BlockFormula {
    pub fn from_terms(mut terms: Vec<Term>) -> Self {
        terms.sort();
        terms.dedup();
        Self { terms }
    }

    pub fn falsum() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn truth() -> Self {
        Self {
            terms: vec![Term::top()],
        }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_falsum(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn evaluate(&self, state: StateBits) -> bool {
        self.terms.iter().any(|t| t.holds(state))
    }

    /// Variables mentioned anywhere in the formula, ascending.
    pub fn support(&self) -> Vec<usize> {
        let mut vars: Vec<usize> = self
            .terms
            .iter()
            .flat_map(|t| t.0.iter().map(|l| l.var))
            .collect();
        vars.sort_unstable();
        vars.dedup();
        vars
    }

    /// Smallest satisfying state index.
    pub fn min_state(&self) -> Option<StateBits> {
        self.terms.iter().map(Term::representative).min()
    }

    /// Satisfying states among `2^n_vars`, ascending.
    pub fn states(&self, n_vars: usize) -> Vec<usize> {
        (0..1usize << n_vars)
            .filter(|&s| self.evaluate(s as StateBits))
            .collect()
    }

    /// Equivalent formula whose terms are pairwise inconsistent.
    pub fn disjoint(&self) -> BlockFormula {
        let mut out: Vec<Term> = Vec::new();
        for t in &self.terms {
            let mut pieces = vec![t.clone()];
            for r in &out {
                pieces = pieces.into_iter().flat_map(|p| p.minus(r)).collect();
                if pieces.is_empty() {
                    break;
                }
            }
            out.extend(pieces);
        }
        Self::from_terms(out)
    }

    /// Disjunction of minterms for `states`, simplified.
    pub fn from_states(states: &[usize], n_vars: usize) -> Self {
        let terms = states
            .iter()
            .map(|&s| {
                Term(
                    (0..n_vars)
                        .map(|v| Literal {
                            var: v,
                            positive: (s >> v) & 1 == 1,
                        })
                        .collect(),
                )
            })
            .collect();
        simplify_formula(&Self::from_terms(terms))
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> FormulaDisplay<'a> {
        FormulaDisplay {
            formula: self,
            names,
        }
    }
}

pub struct FormulaDisplay<'a> {
    formula: &'a BlockFormula,
    names: &'a [String],
}

impl fmt::Display for FormulaDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.formula.is_falsum() {
            return write!(f, "false");
        }
        for (i, term) in self.formula.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " | ")?;
            }
            if term.is_empty() {
                write!(f, "true")?;
            }
            for (j, lit) in term.0.iter().enumerate() {
                if j > 0 {
                    write!(f, " & ")?;
                }
                let bang = if lit.positive { "" } else { "!" };
                match self.names.get(lit.var) {
                    Some(name) => write!(f, "{bang}{name}")?,
                    None => write!(f, "{bang}x{}", lit.var)?,
                }
            }
        }
        Ok(())
    }
}

/// Equivalent DNF after duplicate removal, absorption (`X ∨ X∧Y → X`) and
/// merging of terms that differ only in the sign of one literal.
pub fn simplify_formula(phi: &BlockFormula) -> BlockFormula {
    let mut terms = phi.terms.clone();
    loop {
        let before = terms.len();
        terms = merge_adjacent(terms);
        terms = absorb(terms);
        if terms.len() == before {
            return BlockFormula::from_terms(terms);
        }
    }
}

fn merge_adjacent(terms: Vec<Term>) -> Vec<Term> {
    let mut current = BlockFormula::from_terms(terms).terms;
    loop {
        let present: HashSet<&Term> = current.iter().collect();
        let mut used: HashSet<usize> = HashSet::new();
        let index: HashMap<&Term, usize> = current.iter().enumerate().map(|(i, t)| (t, i)).collect();
        let mut out = Vec::with_capacity(current.len());
        let mut merged_any = false;
        for (i, t) in current.iter().enumerate() {
            if used.contains(&i) {
                continue;
            }
            let mut merged = None;
            for k in 0..t.0.len() {
                let mut flipped = t.clone();
                flipped.0[k] = flipped.0[k].negated();
                if !present.contains(&flipped) {
                    continue;
                }
                let j = index[&flipped];
                if used.contains(&j) {
                    continue;
                }
                used.insert(j);
                let mut reduced = t.clone();
                reduced.0.remove(k);
                merged = Some(reduced);
                break;
            }
            used.insert(i);
            match merged {
                Some(m) => {
                    merged_any = true;
                    out.push(m);
                }
                None => out.push(t.clone()),
            }
        }
        current = BlockFormula::from_terms(out).terms;
        if !merged_any {
            return current;
        }
    }
}

fn absorb(mut terms: Vec<Term>) -> Vec<Term> {
    terms.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    terms.dedup();
    let mut kept: Vec<Term> = Vec::with_capacity(terms.len());
    for t in terms {
        if !kept.iter().any(|k| k.is_subset_of(&t)) {
            kept.push(t);
        }
    }
    kept
}

/// Binary decision tree over time-t fluents.
#[derive(Debug, Clone, PartialEq)]
pub enum DecisionTree<T> {
    Leaf(T),
    Node {
        var: usize,
        high: Box<DecisionTree<T>>,
        low: Box<DecisionTree<T>>,
    },
}

impl<T: Scalar> DecisionTree<T> {
    pub fn leaf(value: T) -> Self {
        Self::Leaf(value)
    }

    pub fn node(var: usize, high: Self, low: Self) -> Self {
        Self::Node {
            var,
            high: Box::new(high),
            low: Box::new(low),
        }
    }

    pub fn evaluate(&self, state: StateBits) -> T {
        let mut tree = self;
        loop {
            match tree {
                Self::Leaf(v) => return *v,
                Self::Node { var, high, low } => {
                    tree = if (state >> var) & 1 == 1 { high } else { low };
                }
            }
        }
    }

    /// Root-to-leaf paths as `(conjunction, leaf)`.
    pub fn paths(&self) -> Vec<(Term, T)> {
        self.restricted_paths(&Term::top())
    }

    /// Paths consistent with `context`, each conjoined with it. Tests already
    /// decided by `context` are followed without branching.
    pub fn restricted_paths(&self, context: &Term) -> Vec<(Term, T)> {
        let mut out = Vec::new();
        self.collect_paths(context.clone(), &mut out);
        out
    }

    /// True when every test on the path selected by `term` is bound in it.
    fn decided_by(&self, term: &Term) -> bool {
        let mut tree = self;
        loop {
            match tree {
                Self::Leaf(_) => return true,
                Self::Node { var, high, low } => match term.value_of(*var) {
                    Some(true) => tree = high,
                    Some(false) => tree = low,
                    None => return false,
                },
            }
        }
    }

    fn collect_paths(&self, term: Term, out: &mut Vec<(Term, T)>) {
        match self {
            Self::Leaf(v) => out.push((term, *v)),
            Self::Node { var, high, low } => match term.value_of(*var) {
                Some(true) => high.collect_paths(term, out),
                Some(false) => low.collect_paths(term, out),
                None => {
                    let t = term.with(Literal::pos(*var)).expect("unbound variable");
                    let f = term.with(Literal::neg(*var)).expect("unbound variable");
                    high.collect_paths(t, out);
                    low.collect_paths(f, out);
                }
            },
        }
    }

    pub fn leaves(&self) -> Vec<T> {
        match self {
            Self::Leaf(v) => vec![*v],
            Self::Node { high, low, .. } => {
                let mut out = high.leaves();
                out.extend(low.leaves());
                out
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Self::Leaf(_) => 0,
            Self::Node { high, low, .. } => 1 + high.depth().max(low.depth()),
        }
    }

    /// Variables tested anywhere in the tree, ascending.
    pub fn tested_variables(&self) -> Vec<usize> {
        let mut vars = Vec::new();
        self.visit_tests(&mut vars);
        vars.sort_unstable();
        vars.dedup();
        vars
    }

    fn visit_tests(&self, vars: &mut Vec<usize>) {
        if let Self::Node { var, high, low } = self {
            vars.push(*var);
            high.visit_tests(vars);
            low.visit_tests(vars);
        }
    }

    fn check_structure(&self, n_vars: usize, path: &mut Vec<usize>) -> std::result::Result<(), String> {
        match self {
            Self::Leaf(_) => Ok(()),
            Self::Node { var, high, low } => {
                if *var >= n_vars {
                    return Err(format!("tests undeclared variable {var}"));
                }
                if path.contains(var) {
                    return Err(format!("tests variable {var} twice on one path"));
                }
                path.push(*var);
                high.check_structure(n_vars, path)?;
                low.check_structure(n_vars, path)?;
                path.pop();
                Ok(())
            }
        }
    }
}

/// Boolean-fluent MDP with one CPT tree per (action, fluent) giving
/// `Pr(X_{i,t+1} = true)` and a reward tree, both over time-t fluents.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredMdp<T> {
    variables: Vec<String>,
    actions: Vec<String>,
    discount: T,
    /// Indexed `[action][variable]`.
    cpts: Vec<Vec<DecisionTree<T>>>,
    reward: DecisionTree<T>,
}

impl<T: Scalar> FactoredMdp<T> {
    pub fn new(
        variables: Vec<String>,
        actions: Vec<String>,
        discount: T,
        cpts: Vec<Vec<DecisionTree<T>>>,
        reward: DecisionTree<T>,
    ) -> Result<Self> {
        let f = Self {
            variables,
            actions,
            discount,
            cpts,
            reward,
        };
        f.validate().map_err(Error::InvalidFactored)?;
        Ok(f)
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn n_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn discount(&self) -> T {
        self.discount
    }

    pub fn cpt(&self, action: usize, var: usize) -> &DecisionTree<T> {
        &self.cpts[action][var]
    }

    pub fn reward_tree(&self) -> &DecisionTree<T> {
        &self.reward
    }

    pub fn reward(&self, state: StateBits) -> T {
        self.reward.evaluate(state)
    }

    /// `Pr(X_{var,t+1} = true | state, action)`.
    pub fn next_true_prob(&self, state: StateBits, action: usize, var: usize) -> T {
        self.cpts[action][var].evaluate(state)
    }

    /// Parents of fluent `var` under `action`: the variables its CPT tests.
    pub fn parents(&self, action: usize, var: usize) -> Vec<usize> {
        self.cpts[action][var].tested_variables()
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let n = self.variables.len();
        if n > MAX_VARIABLES {
            return Err(format!("{n} variables exceeds the limit of {MAX_VARIABLES}"));
        }
        if self.actions.is_empty() {
            return Err("no actions declared".into());
        }
        let mut report = ValidationReport::default();
        check_discount(self.discount, &mut report);
        if !report.is_ok() {
            return Err(report.to_string());
        }
        check_names("variable", &self.variables)?;
        check_names("action", &self.actions)?;
        if self.cpts.len() != self.actions.len() || self.cpts.iter().any(|row| row.len() != n) {
            return Err("CPT table must have one tree per action and variable".into());
        }
        for (a, trees) in self.cpts.iter().enumerate() {
            for (v, tree) in trees.iter().enumerate() {
                let at = format!("cpt {} {}", self.actions[a], self.variables[v]);
                tree.check_structure(n, &mut Vec::new())
                    .map_err(|e| format!("{at}: {e}"))?;
                if let Some(x) = tree.leaves().into_iter().find(|&x| !(x >= T::zero() && x <= T::one())) {
                    return Err(format!("{at}: leaf probability {x} outside [0, 1]"));
                }
            }
        }
        self.reward
            .check_structure(n, &mut Vec::new())
            .map_err(|e| format!("reward: {e}"))?;
        if self.reward.leaves().iter().any(|x| !x.is_finite()) {
            return Err("reward: non-finite leaf".into());
        }
        Ok(())
    }
}

fn check_names(kind: &str, names: &[String]) -> std::result::Result<(), String> {
    let mut seen = HashSet::new();
    for name in names {
        let mut chars = name.chars();
        let ok = chars
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.');
        if !ok || name == "true" || name == "false" {
            return Err(format!("invalid {kind} name {name:?}"));
        }
        if !seen.insert(name.as_str()) {
            return Err(format!("duplicate {kind} name {name:?}"));
        }
    }
    Ok(())
}

/// Flat MDP over all `2^m` fluent assignments using the product of the
/// per-fluent next-state marginals.
pub fn expand_to_explicit<T: Scalar>(f: &FactoredMdp<T>) -> Result<ExplicitMdp<T>> {
    let m = f.n_variables();
    if m > MAX_EXPAND_VARIABLES {
        return Err(Error::TooManyVariables {
            n: m,
            max: MAX_EXPAND_VARIABLES,
        });
    }
    let n = 1usize << m;
    let rewards = (0..n).map(|p| f.reward(p as StateBits)).collect();
    let transitions = (0..f.n_actions())
        .map(|a| {
            (0..n)
                .map(|p| {
                    let mut row: Vec<(usize, T)> = vec![(0, T::one())];
                    for v in 0..m {
                        let t = f.next_true_prob(p as StateBits, a, v);
                        let mut next = Vec::with_capacity(row.len() * 2);
                        for &(q, pr) in &row {
                            if t < T::one() {
                                next.push((q, pr * (T::one() - t)));
                            }
                            if t > T::zero() {
                                next.push((q | (1 << v), pr * t));
                            }
                        }
                        row = next;
                    }
                    row
                })
                .collect()
        })
        .collect();
    ExplicitMdp::try_new(n, f.n_actions(), f.discount(), rewards, transitions)
}

pub fn evaluate_formula(phi: &BlockFormula, state: StateBits) -> bool {
    phi.evaluate(state)
}

/// Probability that the successor of `state` under `action` satisfies `phi`.
///
/// Successor fluents are independent given `state`, so only the fluents in
/// `phi`'s support matter; the formula is expanded on them one at a time.
pub fn block_prob_factored<T: Scalar>(
    f: &FactoredMdp<T>,
    state: StateBits,
    action: usize,
    phi: &BlockFormula,
) -> T {
    block_prob_with_support(f, state, action, phi, &phi.support())
}

fn block_prob_with_support<T: Scalar>(
    f: &FactoredMdp<T>,
    state: StateBits,
    action: usize,
    phi: &BlockFormula,
    support: &[usize],
) -> T {
    if let [term] = phi.terms.as_slice() {
        return term
            .0
            .iter()
            .map(|l| {
                let t = f.next_true_prob(state, action, l.var);
                if l.positive {
                    t
                } else {
                    T::one() - t
                }
            })
            .fold(T::one(), |acc, x| acc * x);
    }
    let marginals: Vec<(usize, T)> = support
        .iter()
        .map(|&v| (v, f.next_true_prob(state, action, v)))
        .collect();
    formula_prob(&phi.terms, &marginals)
}

fn formula_prob<T: Scalar>(terms: &[Term], marginals: &[(usize, T)]) -> T {
    if terms.is_empty() {
        return T::zero();
    }
    if terms.iter().any(Term::is_empty) {
        return T::one();
    }
    let var = terms
        .iter()
        .filter_map(|t| t.0.first().map(|l| l.var))
        .min()
        .expect("nonempty terms");
    let t = marginals[marginals.partition_point(|m| m.0 < var)].1;
    let mut total = T::zero();
    if t > T::zero() {
        total = total + t * formula_prob(&cofactor(terms, var, true), marginals);
    }
    if t < T::one() {
        total = total + (T::one() - t) * formula_prob(&cofactor(terms, var, false), marginals);
    }
    total
}

fn cofactor(terms: &[Term], var: usize, value: bool) -> Vec<Term> {
    terms
        .iter()
        .filter_map(|t| match t.value_of(var) {
            None => Some(t.clone()),
            Some(v) if v == value => Some(Term(t.0.iter().copied().filter(|l| l.var != var).collect())),
            Some(_) => None,
        })
        .collect()
}

/// Mutually exclusive, exhaustive regions of time-t states on which the
/// probability of reaching `phi` is constant for every action.
pub fn region_partition<T: Scalar>(
    f: &FactoredMdp<T>,
    phi: &BlockFormula,
    cap: usize,
) -> Result<Vec<Term>> {
    regions_within(f, &phi.support(), &Term::top(), cap)
}

/// Regions for a formula with the given support, restricted to `context`.
/// Equals `{context ∧ r}` over the unrestricted regions `r`, in the same
/// order, without generating the inconsistent ones.
fn regions_within<T: Scalar>(
    f: &FactoredMdp<T>,
    support: &[usize],
    context: &Term,
    cap: usize,
) -> Result<Vec<Term>> {
    let mut regions = vec![context.clone()];
    for &var in support {
        for a in 0..f.n_actions() {
            let tree = f.cpt(a, var);
            if regions.iter().all(|r| tree.decided_by(r)) {
                continue;
            }
            regions = regions
                .iter()
                .flat_map(|r| tree.restricted_paths(r).into_iter().map(|(t, _)| t))
                .collect();
            if regions.len() > cap {
                return Err(Error::SymbolicBudgetExceeded { cap });
            }
        }
    }
    Ok(regions)
}

/// A piece of a block with its per-action probability of reaching the target.
struct Piece<T> {
    term: Term,
    profile: Vec<T>,
}

/// Target block with its support computed once.
struct Target<'a> {
    formula: &'a BlockFormula,
    support: Vec<usize>,
}

impl<'a> Target<'a> {
    fn new(formula: &'a BlockFormula) -> Self {
        Self {
            formula,
            support: formula.support(),
        }
    }
}

/// Splits the disjoint terms of a block along the regions of `target`.
fn pieces_of<T: Scalar>(
    f: &FactoredMdp<T>,
    c_disjoint: &[Term],
    target: &Target<'_>,
    cap: usize,
) -> Result<Vec<Piece<T>>> {
    let mut pieces = Vec::new();
    for ct in c_disjoint {
        for term in regions_within(f, &target.support, ct, cap)? {
            let rep = term.representative();
            let profile = (0..f.n_actions())
                .map(|a| block_prob_with_support(f, rep, a, target.formula, &target.support))
                .collect();
            pieces.push(Piece { term, profile });
            if pieces.len() > cap {
                return Err(Error::SymbolicBudgetExceeded { cap });
            }
        }
    }
    Ok(pieces)
}

fn first_unstable<T: Scalar>(pieces: &[Piece<T>], n_actions: usize, epsilon: T) -> Option<usize> {
    let limit = epsilon + T::tol(EQ_TOL);
    (0..n_actions).find(|&a| {
        let (lo, hi) = pieces
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), p| {
                (lo.min(p.profile[a]), hi.max(p.profile[a]))
            });
        hi - lo > limit
    })
}

fn cluster_pieces<T: Scalar>(pieces: Vec<Piece<T>>, epsilon: T) -> Result<Vec<BlockFormula>> {
    let profiles: Vec<Vec<T>> = pieces.iter().map(|p| p.profile.clone()).collect();
    let groups = cluster_epsilon_uniform(&profiles, epsilon)?;
    let mut out: Vec<BlockFormula> = groups
        .into_iter()
        .map(|g| {
            let terms = g.into_iter().map(|i| pieces[i].term.clone()).collect();
            simplify_formula(&BlockFormula::from_terms(terms))
        })
        .collect();
    sort_blocks(&mut out);
    Ok(out)
}

fn sort_blocks(blocks: &mut [BlockFormula]) {
    blocks.sort_by_key(|b| b.min_state());
}

/// Splits block `c` into maximal sub-blocks that are ε-stable with respect to
/// block `b`, working on formulas only.
pub fn symbolic_split<T: Scalar>(
    f: &FactoredMdp<T>,
    c: &BlockFormula,
    b: &BlockFormula,
    epsilon: T,
    cap: usize,
) -> Result<Vec<BlockFormula>> {
    let pieces = pieces_of(f, c.disjoint().terms(), &Target::new(b), cap)?;
    cluster_pieces(pieces, epsilon)
}

/// Output of [`symbolic_reduce`].
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicReduction<T> {
    pub blocks: Vec<BlockFormula>,
    pub bmdp: Bmdp<T>,
    pub trace: ReductionTrace<BlockFormula, T>,
}

fn check_epsilon<T: Scalar>(epsilon: T) -> Result<()> {
    if epsilon >= T::zero() && epsilon < T::one() {
        Ok(())
    } else {
        Err(Error::EpsilonOutOfRange(epsilon.as_f64()))
    }
}

/// Initial blocks: reward-tree paths grouped by an ε-uniform clustering of
/// the immediate reward partition.
fn reward_blocks<T: Scalar>(f: &FactoredMdp<T>, epsilon: T) -> Result<Vec<BlockFormula>> {
    let paths = f.reward_tree().paths();
    let values: Vec<Vec<T>> = paths.iter().map(|(_, r)| vec![*r]).collect();
    let exact = cluster_epsilon_uniform(&values, T::zero())?;
    let reps: Vec<Vec<T>> = exact.iter().map(|g| values[g[0]].clone()).collect();
    let groups = cluster_epsilon_uniform(&reps, epsilon)?;
    let mut blocks: Vec<BlockFormula> = groups
        .into_iter()
        .map(|g| {
            let terms = g
                .iter()
                .flat_map(|&i| exact[i].iter().map(|&k| paths[k].0.clone()))
                .collect();
            simplify_formula(&BlockFormula::from_terms(terms))
        })
        .collect();
    sort_blocks(&mut blocks);
    Ok(blocks)
}

/// ε-reduction of a factored MDP on block formulas, with the same pass
/// structure as [`reduce_model`], followed by symbolic BMDP induction.
pub fn symbolic_reduce<T: Scalar>(
    f: &FactoredMdp<T>,
    epsilon: T,
    cap: usize,
) -> Result<SymbolicReduction<T>> {
    check_epsilon(epsilon)?;
    let initial = reward_blocks(f, epsilon)?;
    let mut trace = ReductionTrace {
        initial: initial.clone(),
        events: Vec::new(),
        epsilon,
        passes: 0,
    };
    let mut blocks = initial;
    let mut stable: HashSet<BlockFormula> = HashSet::new();
    let mut previous: HashSet<BlockFormula> = HashSet::new();
    loop {
        trace.passes += 1;
        let pass = trace.passes;
        let snapshot = blocks.clone();
        let targets: Vec<Target<'_>> = snapshot.iter().map(Target::new).collect();
        let mut next = Vec::with_capacity(snapshot.len());
        let mut changed = false;
        let mut unsplit = HashSet::new();
        for c in &snapshot {
            let mut parts = vec![(c.clone(), c.disjoint())];
            // A block that survived the previous pass whole is stable with
            // respect to every block of that pass.
            let settled = stable.contains(c);
            for target in &targets {
                if settled && previous.contains(target.formula) {
                    continue;
                }
                let mut refined = Vec::with_capacity(parts.len());
                for (part, disjoint) in parts {
                    let pieces = pieces_of(f, disjoint.terms(), target, cap)?;
                    let Some(action) = first_unstable(&pieces, f.n_actions(), epsilon) else {
                        refined.push((part, disjoint));
                        continue;
                    };
                    let split = cluster_pieces(pieces, epsilon)?;
                    changed = true;
                    trace.events.push(SplitEvent {
                        pass,
                        block: part,
                        witness: target.formula.clone(),
                        action,
                        parts: split.clone(),
                    });
                    refined.extend(split.into_iter().map(|b| {
                        let d = b.disjoint();
                        (b, d)
                    }));
                }
                parts = refined;
            }
            if parts.len() == 1 && &parts[0].0 == c {
                unsplit.insert(c.clone());
            }
            next.extend(parts.into_iter().map(|(b, _)| b));
        }
        stable = unsplit;
        previous = snapshot.iter().cloned().collect();
        sort_blocks(&mut next);
        blocks = next;
        if !changed {
            break;
        }
    }
    let bmdp = induce_bmdp_symbolic(f, &blocks, cap)?;
    Ok(SymbolicReduction {
        blocks,
        bmdp,
        trace,
    })
}

/// Block-level BMDP computed from formulas: min/max reward leaves reachable
/// inside each block, and min/max block probabilities over region pieces.
pub fn induce_bmdp_symbolic<T: Scalar>(
    f: &FactoredMdp<T>,
    blocks: &[BlockFormula],
    cap: usize,
) -> Result<Bmdp<T>> {
    let n = blocks.len();
    let disjoint: Vec<BlockFormula> = blocks.iter().map(BlockFormula::disjoint).collect();
    let rewards = disjoint
        .iter()
        .map(|b| {
            let (lo, hi) = b
                .terms()
                .iter()
                .flat_map(|t| f.reward_tree().restricted_paths(t))
                .fold((T::infinity(), T::neg_infinity()), |(lo, hi), (_, r)| {
                    (lo.min(r), hi.max(r))
                });
            Interval::new(lo, hi)
        })
        .collect();
    let targets: Vec<Target<'_>> = blocks.iter().map(Target::new).collect();
    let mut rows = vec![vec![IntervalRow::new(); n]; f.n_actions()];
    for (i, source) in disjoint.iter().enumerate() {
        for (j, target) in targets.iter().enumerate() {
            let pieces = pieces_of(f, source.terms(), target, cap)?;
            for (a, action_rows) in rows.iter_mut().enumerate() {
                let (lo, hi) = pieces
                    .iter()
                    .fold((T::infinity(), T::neg_infinity()), |(lo, hi), p| {
                        (lo.min(p.profile[a]), hi.max(p.profile[a]))
                    });
                if hi > T::zero() {
                    action_rows[i].push((j, Interval::new(lo, hi)));
                }
            }
        }
    }
    Ok(Bmdp::new(n, f.n_actions(), f.discount(), rewards, rows))
}

/// State-level partition denoted by block formulas over `n_vars` fluents.
pub fn formulas_to_partition(blocks: &[BlockFormula], n_vars: usize) -> Result<Partition> {
    if n_vars > MAX_EXPAND_VARIABLES {
        return Err(Error::TooManyVariables {
            n: n_vars,
            max: MAX_EXPAND_VARIABLES,
        });
    }
    let sets = blocks.iter().map(|b| b.states(n_vars)).collect();
    Partition::new(1 << n_vars, sets)
}

/// Block formulas (simplified minterm covers) for a state-level partition.
pub fn partition_to_formulas(partition: &Partition, n_vars: usize) -> Vec<BlockFormula> {
    partition
        .blocks()
        .iter()
        .map(|b| BlockFormula::from_states(b, n_vars))
        .collect()
}

/// Result of reducing a factored model, symbolically when the region budget
/// allows and through the explicit expansion otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredReduction<T> {
    pub blocks: Vec<BlockFormula>,
    pub bmdp: Bmdp<T>,
    pub used_explicit_fallback: bool,
}

pub fn reduce_factored<T: Scalar>(
    f: &FactoredMdp<T>,
    epsilon: T,
    cap: usize,
) -> Result<FactoredReduction<T>> {
    match symbolic_reduce(f, epsilon, cap) {
        Ok(r) => Ok(FactoredReduction {
            blocks: r.blocks,
            bmdp: r.bmdp,
            used_explicit_fallback: false,
        }),
        Err(Error::SymbolicBudgetExceeded { .. }) if f.n_variables() <= MAX_EXPAND_VARIABLES => {
            let m = expand_to_explicit(f)?;
            let (partition, _) = reduce_model(&m, epsilon)?;
            let bmdp = crate::reduction::induce_bmdp(&m, &partition)?;
            Ok(FactoredReduction {
                blocks: partition_to_formulas(&partition, f.n_variables()),
                bmdp,
                used_explicit_fallback: true,
            })
        }
        Err(e) => Err(e),
    }
}
