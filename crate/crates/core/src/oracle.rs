//! Exact marginals, used as ground truth.
//!
//! Two independent routes: exhaustive enumeration of the joint, and, for
//! binary models, exact sum-product on the self-avoiding-walk tree with every
//! cycle-induced leaf clamped by the telescoping rule below.

use crate::error::{Error, Result};
use crate::model::Model;
use crate::par;
use crate::tree::{build_saw_tree, NodeKind, UnrolledTree};

/// Default cap on the number of enumerated assignments.
pub const DEFAULT_STATE_CAP: u128 = 1 << 24;

const CHUNK: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactMarginals {
    pub marginals: Vec<Vec<f64>>,
    /// Sum of the unnormalized joint over all assignments.
    pub partition: f64,
}

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn merge(&mut self, other: Compensated) {
        self.add(other.sum);
        self.add(other.comp);
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

/// Number of assignments, or `None` on overflow.
pub fn state_space_size(model: &Model) -> Option<u128> {
    model.cardinalities().iter().try_fold(1u128, |acc, &k| acc.checked_mul(k as u128))
}

/// Exact marginals by enumerating every assignment (lexicographic, node 0
/// most significant). Refuses models with more than `cap` assignments.
///
/// The assignment space is split into fixed-size chunks that are summed
/// independently and reduced in chunk order, so the result does not depend on
/// the number of threads.
pub fn exact_marginals_bruteforce(model: &Model, cap: u128) -> Result<ExactMarginals> {
    let total = state_space_size(model).unwrap_or(u128::MAX);
    if total > cap {
        return Err(Error::StateSpaceTooLarge { required: total, cap });
    }
    let total = total as usize;
    let n = model.node_count();
    let cards = model.cardinalities();
    let offsets: Vec<usize> = cards
        .iter()
        .scan(0, |acc, &k| {
            let o = *acc;
            *acc += k;
            Some(o)
        })
        .collect();
    let slots = cards.iter().sum::<usize>();

    let chunks = total.div_ceil(CHUNK);
    let partials = par::map_indexed(chunks, |c| {
        let start = c * CHUNK;
        let end = (start + CHUNK).min(total);
        let mut x = vec![0usize; n];
        let mut rest = start;
        for i in (0..n).rev() {
            x[i] = rest % cards[i];
            rest /= cards[i];
        }
        let mut z = Compensated::default();
        let mut acc = vec![Compensated::default(); slots];
        for _ in start..end {
            let w = model.joint_unchecked(&x);
            z.add(w);
            for i in 0..n {
                acc[offsets[i] + x[i]].add(w);
            }
            // odometer, last node fastest
            for i in (0..n).rev() {
                x[i] += 1;
                if x[i] < cards[i] {
                    break;
                }
                x[i] = 0;
            }
        }
        (z, acc)
    });

    let mut z = Compensated::default();
    let mut acc = vec![Compensated::default(); slots];
    for (pz, pacc) in partials {
        z.merge(pz);
        for (a, b) in acc.iter_mut().zip(pacc) {
            a.merge(b);
        }
    }
    let partition = z.value();
    let marginals = (0..n)
        .map(|i| (0..cards[i]).map(|s| acc[offsets[i] + s].value() / partition).collect())
        .collect();
    Ok(ExactMarginals { marginals, partition })
}

/// Clamped state of every cycle-induced leaf.
///
/// A leaf visiting vertex `s` closes a cycle at the first occurrence of `s`
/// on its path. Let `k` be the neighbor of `s` through which the walk left
/// that occurrence and `i` the neighbor through which it came back. The leaf
/// is clamped to state 0 if `i < k` and to state 1 if `i > k`.
fn clamp_states(tree: &UnrolledTree) -> Vec<Option<usize>> {
    let nodes = tree.nodes();
    nodes
        .iter()
        .map(|leaf| {
            if leaf.kind != NodeKind::CycleInduced {
                return None;
            }
            let arrived_from = nodes[leaf.parent?].gamma;
            // climb to the earlier occurrence of the same vertex, remembering
            // the node just below it
            let mut below = leaf.parent?;
            let mut cur = nodes[below].parent?;
            while nodes[cur].gamma != leaf.gamma {
                below = cur;
                cur = nodes[cur].parent?;
            }
            let departed_to = nodes[below].gamma;
            debug_assert_ne!(arrived_from, departed_to);
            Some(usize::from(arrived_from > departed_to))
        })
        .collect()
}

/// Exact marginal of `v` in a binary model from its self-avoiding-walk tree.
///
/// Fails if any variable is not binary or the complete tree does not fit in
/// `budget` nodes.
pub fn weitz_exact_binary(model: &Model, v: usize, budget: usize) -> Result<Vec<f64>> {
    if let Some((node, &cardinality)) = model.cardinalities().iter().enumerate().find(|(_, &k)| k != 2) {
        return Err(Error::NotBinary { node, cardinality });
    }
    let tree = build_saw_tree(model, v, budget)?;
    if tree.is_truncated() {
        return Err(Error::BudgetExceeded { budget });
    }
    if model.degree(v) == 0 {
        return Ok(normalize(model.isolated_unary(v).map_or_else(|| vec![1.0, 1.0], <[f64]>::to_vec)));
    }
    let clamp = clamp_states(&tree);
    let nodes = tree.nodes();
    // upward[i] = message from node i to its parent, over the parent's states
    let mut upward: Vec<[f64; 2]> = vec![[1.0, 1.0]; nodes.len()];
    let mut root = [1.0, 1.0];
    for id in (0..nodes.len()).rev() {
        let node = &nodes[id];
        let mut own = [1.0, 1.0];
        for &c in &node.children {
            own[0] *= upward[c][0];
            own[1] *= upward[c][1];
        }
        let Some(p) = node.parent else {
            root = own;
            break;
        };
        let e = node.edge.expect("non-root node has an edge");
        let from = nodes[p].gamma;
        let mut msg = [0.0; 2];
        for (xp, m) in msg.iter_mut().enumerate() {
            *m = match clamp[id] {
                Some(s) => model.potential(e, from, xp, s),
                None => (0..2).map(|x| model.potential(e, from, xp, x) * own[x]).sum(),
            };
        }
        let s = msg[0] + msg[1];
        upward[id] = [msg[0] / s, msg[1] / s];
    }
    Ok(normalize(root.to_vec()))
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}
