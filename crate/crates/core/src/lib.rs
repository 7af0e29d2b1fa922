//! Approximate model reduction for factored Markov decision processes.
//!
//! A factored MDP is reduced to a small bounded-parameter MDP (BMDP) by
//! refining a partition of its state space until every block is
//! ε-homogeneous. Interval value iteration on the BMDP then yields lower and
//! upper bounds on optimal values together with a pessimistic policy, all of
//! which lift back to the original states.
//!
//! Every model type is generic over a [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

pub mod error;
pub mod factored;
pub mod harness;
pub mod interval;
pub mod io;
pub mod ivi;
pub mod mdp;
pub mod reduction;
pub mod scalar;

pub use error::{Error, Result};
pub use factored::{
    block_prob_factored, evaluate_formula, expand_to_explicit, reduce_factored,
    region_partition, simplify_formula, symbolic_reduce, symbolic_split, BlockFormula,
    DecisionTree, FactoredMdp, Literal, Term,
};
pub use interval::{contains_member, point_bmdp, sample_member, Bmdp, Interval};
pub use ivi::{
    extract_pessimistic_policy, extreme_transition_vector, ivi_bound_optimal, ivi_bound_policy,
    materialize_extreme_mdp, ActionScope, BoundedValueResult, Extremum,
};
pub use mdp::{
    policy_evaluate, value_iterate, ExplicitMdp, Policy, ValidationReport, ValueFunction,
};
pub use reduction::{
    block_transition_prob, check_block_stability, cluster_epsilon_uniform,
    immediate_reward_partition, induce_bmdp, lift_block_function, reduce_model, split_block,
    verify_homogeneity, Partition, ReductionTrace,
};
pub use scalar::Scalar;

pub type Mdp64 = ExplicitMdp<f64>;
pub type Mdp32 = ExplicitMdp<f32>;
pub type Bmdp64 = Bmdp<f64>;
pub type Bmdp32 = Bmdp<f32>;
pub type FactoredMdp64 = FactoredMdp<f64>;
pub type FactoredMdp32 = FactoredMdp<f32>;
pub type Interval64 = Interval<f64>;
pub type ValueFunction64 = ValueFunction<f64>;
pub type BoundedValueResult64 = BoundedValueResult<f64>;
