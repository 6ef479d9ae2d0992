//! Loopy belief propagation on discrete pairwise Markov random fields, with
//! certified confidence intervals around every belief.
//!
//! The pipeline is:
//!
//! 1. build or load a [`Model`] (see [`format`] for the text format),
//! 2. run synchronous BP with [`bp::run_bp`],
//! 3. bound the distance between each belief and the true marginal with
//!    [`bound::saw_accuracy_bound`], which unrolls the graph into a
//!    self-avoiding-walk tree ([`tree`]) and propagates worst-case
//!    dynamic-range errors through it,
//! 4. convert the bound to per-state probability intervals with
//!    [`bound::marginal_intervals`].
//!
//! [`oracle`] provides exact marginals (enumeration, and the binary
//! self-avoiding-walk construction) used to check the guarantee.

pub mod bound;
pub mod bp;
mod error;
pub mod format;
pub mod generate;
pub mod model;
pub mod oracle;
pub mod par;
pub mod tree;

pub use bound::{
    bethe_convergence_bound, contract, interval_from_bound, marginal_intervals,
    saw_accuracy_bound, tree_delta_recursion, DeltaBound, ForcingSpec, IntervalOptions,
    IntervalReport, IntervalRow, Roots,
};
pub use bp::{belief, dynamic_range, partial_product, run_bp, update_message, BpInit, BpOptions, BpReport, MessageSet};
pub use error::{Error, Result};
pub use model::{potential_strength, Model, ModelBuilder, Neighbor, PotentialTable, Violation};
pub use oracle::{exact_marginals_bruteforce, weitz_exact_binary, ExactMarginals};
pub use tree::{
    build_bethe_tree, build_saw_tree, classify_leaves, cycle_involved_nodes, NodeKind, TreeNode,
    TreeStats, UnrolledTree,
};

/// Default node budget for unrolled trees.
pub const DEFAULT_BUDGET: usize = 1_000_000;
/// Default iteration cap for BP.
pub const DEFAULT_MAX_ITERS: usize = 1000;
/// Default BP convergence tolerance on the log dynamic range of message changes.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
