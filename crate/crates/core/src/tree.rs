//! Tree unrollings of a loopy graph.
//!
//! Both expansions are rooted at a vertex `v` and contain non-backtracking
//! walks from `v`; every tree node records the graph vertex it visits
//! (`gamma`). The Bethe tree keeps every such walk up to a fixed depth. The
//! self-avoiding-walk (SAW) tree keeps walks whose vertices are distinct
//! except possibly the last one; a walk that returns to a vertex already on
//! its path ends there as a cycle-induced leaf.
//!
//! Nodes are stored in breadth-first order, so every parent index is smaller
//! than its children's and a reverse scan is a valid post-order. Children are
//! listed in ascending order of the graph neighbor they visit.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Root,
    Internal,
    /// The walk cannot continue without backtracking.
    DeadEnd,
    /// The walk just revisited a vertex on its own path.
    CycleInduced,
    /// Expansion stopped here (depth limit or node budget) although the walk
    /// could continue.
    Truncated,
    /// The vertex carries an unknown external force; not expanded.
    Forced,
}

impl NodeKind {
    pub fn is_leaf(self) -> bool {
        !matches!(self, NodeKind::Root | NodeKind::Internal)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Root => "root",
            NodeKind::Internal => "internal",
            NodeKind::DeadEnd => "dead_end",
            NodeKind::CycleInduced => "cycle_induced",
            NodeKind::Truncated => "truncated",
            NodeKind::Forced => "forced",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub gamma: usize,
    pub parent: Option<usize>,
    /// Graph edge between this node's vertex and its parent's.
    pub edge: Option<usize>,
    pub children: Vec<usize>,
    pub kind: NodeKind,
    pub depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeVariant {
    Bethe { depth: usize },
    SelfAvoiding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnrolledTree {
    nodes: Vec<TreeNode>,
    variant: TreeVariant,
    vertex_count: usize,
}

impl UnrolledTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn variant(&self) -> TreeVariant {
        self.variant
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Whether any node was cut short by the budget or depth limit.
    pub fn is_truncated(&self) -> bool {
        self.nodes.iter().any(|n| n.kind == NodeKind::Truncated)
    }

    /// Vertices visited from the root to `id`, inclusive.
    pub fn walk(&self, id: usize) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.nodes[id].depth + 1);
        let mut cur = Some(id);
        while let Some(c) = cur {
            w.push(self.nodes[c].gamma);
            cur = self.nodes[c].parent;
        }
        w.reverse();
        w
    }

    /// One line per node: `<id> <parent> <gamma> <kind> <depth>`, parent -1 at the root.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (id, n) in self.nodes.iter().enumerate() {
            let parent = n.parent.map_or(-1, |p| p as i64);
            writeln!(s, "{id} {parent} {} {} {}", n.gamma, n.kind.as_str(), n.depth).unwrap();
        }
        s
    }
}

fn on_path(nodes: &[TreeNode], mut id: usize, vertex: usize) -> bool {
    loop {
        if nodes[id].gamma == vertex {
            return true;
        }
        match nodes[id].parent {
            Some(p) => id = p,
            None => return false,
        }
    }
}

/// Non-backtracking continuations of node `id`, ascending by vertex.
fn continuations<'m>(model: &'m Model, nodes: &[TreeNode], id: usize) -> impl Iterator<Item = (usize, usize)> + 'm {
    let back = nodes[id].parent.map(|p| nodes[p].gamma);
    model
        .neighbors(nodes[id].gamma)
        .iter()
        .filter(move |nb| Some(nb.node) != back)
        .map(|nb| (nb.node, nb.edge))
}

fn new_root(v: usize) -> TreeNode {
    TreeNode { gamma: v, parent: None, edge: None, children: Vec::new(), kind: NodeKind::Root, depth: 0 }
}

fn attach(nodes: &mut Vec<TreeNode>, parent: usize, (gamma, edge): (usize, usize), kind: NodeKind) -> usize {
    let id = nodes.len();
    let depth = nodes[parent].depth + 1;
    nodes.push(TreeNode { gamma, parent: Some(parent), edge: Some(edge), children: Vec::new(), kind, depth });
    nodes[parent].children.push(id);
    id
}

/// The depth-`depth` Bethe tree of all non-backtracking walks from `v`.
///
/// Nodes at the depth limit that could still continue are truncated leaves;
/// walks that run out of continuations earlier (or exactly at the limit) are
/// dead ends. Fails if the tree would exceed `budget` nodes.
pub fn build_bethe_tree(model: &Model, v: usize, depth: usize, budget: usize) -> Result<UnrolledTree> {
    model.check_node(v)?;
    let budget = budget.max(1);
    let mut nodes = vec![new_root(v)];
    let mut next = 0;
    while next < nodes.len() {
        let id = next;
        next += 1;
        let conts: Vec<_> = continuations(model, &nodes, id).collect();
        if conts.is_empty() {
            nodes[id].kind = NodeKind::DeadEnd;
            continue;
        }
        if nodes[id].depth >= depth {
            nodes[id].kind = NodeKind::Truncated;
            continue;
        }
        if nodes.len() + conts.len() > budget {
            return Err(Error::BudgetExceeded { budget });
        }
        if id != 0 {
            nodes[id].kind = NodeKind::Internal;
        }
        for c in conts {
            attach(&mut nodes, id, c, NodeKind::Internal);
        }
    }
    Ok(UnrolledTree { nodes, variant: TreeVariant::Bethe { depth }, vertex_count: model.node_count() })
}

/// The complete SAW tree from `v`, expanded breadth-first within `budget` nodes.
pub fn build_saw_tree(model: &Model, v: usize, budget: usize) -> Result<UnrolledTree> {
    build_saw_tree_with_unknown(model, v, budget, &[])
}

/// SAW tree in which nodes visiting a vertex flagged in `unknown` are kept as
/// [`NodeKind::Forced`] leaves and not expanded.
///
/// Expansion is breadth-first and all-or-nothing per node: the first node
/// whose children do not fit in `budget` stops the expansion, and it and
/// every node still waiting in the queue become truncated leaves. The set of
/// expanded nodes is therefore a prefix of the breadth-first order, growing
/// with the budget.
pub fn build_saw_tree_with_unknown(model: &Model, v: usize, budget: usize, unknown: &[bool]) -> Result<UnrolledTree> {
    model.check_node(v)?;
    let budget = budget.max(1);
    let is_unknown = |x: usize| unknown.get(x).copied().unwrap_or(false);
    let mut nodes = vec![new_root(v)];
    if is_unknown(v) {
        nodes[0].kind = NodeKind::Forced;
    }
    let mut next = 0;
    let mut exhausted = false;
    while next < nodes.len() {
        let id = next;
        next += 1;
        if matches!(nodes[id].kind, NodeKind::CycleInduced | NodeKind::Forced) {
            continue;
        }
        let conts: Vec<_> = continuations(model, &nodes, id).collect();
        if conts.is_empty() {
            nodes[id].kind = NodeKind::DeadEnd;
            continue;
        }
        if exhausted || nodes.len() + conts.len() > budget {
            exhausted = true;
            nodes[id].kind = NodeKind::Truncated;
            continue;
        }
        if id != 0 {
            nodes[id].kind = NodeKind::Internal;
        }
        for c in conts {
            let kind = if on_path(&nodes, id, c.0) {
                NodeKind::CycleInduced
            } else if is_unknown(c.0) {
                NodeKind::Forced
            } else {
                NodeKind::Internal
            };
            attach(&mut nodes, id, c, kind);
        }
    }
    Ok(UnrolledTree { nodes, variant: TreeVariant::SelfAvoiding, vertex_count: model.node_count() })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeStats {
    pub node_count: usize,
    pub depth: usize,
    pub internal: usize,
    pub dead_end: usize,
    pub cycle_induced: usize,
    pub truncated: usize,
    pub forced: usize,
    /// Per graph vertex: whether some cycle-induced leaf maps to it.
    pub cycle_involved: Vec<bool>,
}

impl TreeStats {
    pub fn leaf_count(&self) -> usize {
        self.dead_end + self.cycle_induced + self.truncated + self.forced
    }
}

/// Counts nodes by kind and marks the vertices hit by cycle-induced leaves.
pub fn classify_leaves(tree: &UnrolledTree) -> TreeStats {
    let mut stats = TreeStats {
        node_count: tree.len(),
        depth: tree.depth(),
        internal: 0,
        dead_end: 0,
        cycle_induced: 0,
        truncated: 0,
        forced: 0,
        cycle_involved: vec![false; tree.vertex_count],
    };
    for n in tree.nodes() {
        match n.kind {
            NodeKind::Root | NodeKind::Internal => stats.internal += 1,
            NodeKind::DeadEnd => stats.dead_end += 1,
            NodeKind::CycleInduced => {
                stats.cycle_induced += 1;
                stats.cycle_involved[n.gamma] = true;
            }
            NodeKind::Truncated => stats.truncated += 1,
            NodeKind::Forced => stats.forced += 1,
        }
    }
    stats
}

/// Vertices lying on at least one cycle, ascending.
///
/// A vertex is on a cycle iff one of its edges is not a bridge; bridges come
/// from an iterative low-link DFS, so this is linear in the graph size.
pub fn cycle_involved_nodes(model: &Model) -> Vec<usize> {
    let n = model.node_count();
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_cycle = vec![false; n];
    let mut time = 0;
    for start in 0..n {
        if disc[start] != usize::MAX {
            continue;
        }
        // (vertex, edge into it, next neighbor cursor)
        let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(start, None, 0)];
        disc[start] = time;
        low[start] = time;
        time += 1;
        while let Some(&mut (u, via, ref mut cursor)) = stack.last_mut() {
            if let Some(nb) = model.neighbors(u).get(*cursor) {
                *cursor += 1;
                if Some(nb.edge) == via {
                    continue;
                }
                if disc[nb.node] == usize::MAX {
                    disc[nb.node] = time;
                    low[nb.node] = time;
                    time += 1;
                    stack.push((nb.node, Some(nb.edge), 0));
                } else {
                    low[u] = low[u].min(disc[nb.node]);
                    // back edge: both ends lie on a cycle
                    on_cycle[u] = true;
                    on_cycle[nb.node] = true;
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] <= disc[p] {
                        // tree edge p-u is not a bridge
                        on_cycle[p] = true;
                        on_cycle[u] = true;
                    }
                }
            }
        }
    }
    (0..n).filter(|&v| on_cycle[v]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelBuilder, PotentialTable};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Model {
        let mut b = ModelBuilder::new(vec![2; n]);
        for &(u, v) in edges {
            b = b.edge(u, v, PotentialTable::uniform(2, 2));
        }
        b.build().unwrap()
    }

    fn triangle() -> Model {
        graph(3, &[(0, 1), (1, 2), (0, 2)])
    }

    fn walks(t: &UnrolledTree) -> BTreeSet<Vec<usize>> {
        (0..t.len()).map(|i| t.walk(i)).collect()
    }

    #[test]
    fn saw_triangle() {
        let t = build_saw_tree(&triangle(), 0, 1000).unwrap();
        assert_eq!(t.len(), 7);
        let expect: BTreeSet<Vec<usize>> =
            [vec![0], vec![0, 1], vec![0, 2], vec![0, 1, 2], vec![0, 2, 1], vec![0, 1, 2, 0], vec![0, 2, 1, 0]]
                .into_iter()
                .collect();
        assert_eq!(walks(&t), expect);
        let s = classify_leaves(&t);
        assert_eq!((s.cycle_induced, s.dead_end, s.truncated), (2, 0, 0));
        assert_eq!(s.cycle_involved, vec![true, false, false]);
        assert_eq!(
            t.dump(),
            "0 -1 0 root 0\n1 0 1 internal 1\n2 0 2 internal 1\n3 1 2 internal 2\n4 2 1 internal 2\n\
             5 3 0 cycle_induced 3\n6 4 0 cycle_induced 3\n"
        );
    }

    #[test]
    fn saw_four_cycle() {
        let t = build_saw_tree(&graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]), 0, 1000).unwrap();
        assert_eq!(t.len(), 9);
        assert_eq!(classify_leaves(&t).cycle_induced, 2);
    }

    #[test]
    fn saw_of_tree_is_the_tree() {
        let edges = [(0, 1), (1, 2), (1, 3), (3, 4), (0, 5)];
        let m = graph(6, &edges);
        let t = build_saw_tree(&m, 1, 1000).unwrap();
        assert_eq!(t.len(), 6);
        let s = classify_leaves(&t);
        assert_eq!(s.cycle_induced, 0);
        // each non-root node's (parent, child) pair is a distinct graph edge
        let used: BTreeSet<usize> = t.nodes().iter().filter_map(|n| n.edge).collect();
        assert_eq!(used.len(), edges.len());
    }

    #[test]
    fn star_has_dead_ends() {
        let m = graph(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        let s = classify_leaves(&build_saw_tree(&m, 0, 100).unwrap());
        assert_eq!((s.dead_end, s.cycle_induced), (4, 0));
    }

    #[test]
    fn pendant_leaves_are_dead_ends() {
        let m = graph(4, &[(0, 1), (1, 2), (0, 2), (0, 3)]);
        let t = build_saw_tree(&m, 1, 100).unwrap();
        for n in t.nodes().iter().filter(|n| n.gamma == 3) {
            assert_eq!(n.kind, NodeKind::DeadEnd);
        }
    }

    #[test]
    fn bethe_triangle() {
        let t = build_bethe_tree(&triangle(), 0, 4, 1000).unwrap();
        assert_eq!(t.len(), 9);
        assert_eq!(t.depth(), 4);
        let s = classify_leaves(&t);
        assert_eq!(s.truncated, 2);
        // the depth-5 expansion: the SAW tree's walks are a prefix-closed subset
        let b5 = build_bethe_tree(&triangle(), 0, 5, 1000).unwrap();
        assert_eq!(b5.len(), 11);
        let saw = build_saw_tree(&triangle(), 0, 1000).unwrap();
        assert!(walks(&saw).is_subset(&walks(&b5)));
    }

    #[test]
    fn bethe_on_tree_ends_in_dead_ends() {
        let m = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        let t = build_bethe_tree(&m, 0, 3, 100).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(classify_leaves(&t).truncated, 0);
        let t = build_bethe_tree(&m, 0, 2, 100).unwrap();
        assert_eq!(classify_leaves(&t).truncated, 1);
    }

    #[test]
    fn bethe_budget_guard() {
        let m = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]);
        assert!(matches!(build_bethe_tree(&m, 0, 12, 500), Err(Error::BudgetExceeded { budget: 500 })));
    }

    #[test]
    fn saw_budget_truncates_breadth_first() {
        let m = triangle();
        let t = build_saw_tree(&m, 0, 1).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.root().kind, NodeKind::Truncated);
        let t = build_saw_tree(&m, 0, 3).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(classify_leaves(&t).truncated, 2);
        // all-or-nothing: node 1 fits, node 2 does not, node 3 stays queued
        let t = build_saw_tree(&m, 0, 4).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(classify_leaves(&t).truncated, 2);
    }

    #[test]
    fn isolated_root() {
        let m = graph(2, &[]);
        let t = build_saw_tree(&m, 1, 10).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.root().kind, NodeKind::DeadEnd);
        assert!(build_saw_tree(&m, 2, 10).is_err());
    }

    #[test]
    fn forced_vertices_are_not_expanded() {
        let t = build_saw_tree_with_unknown(&triangle(), 0, 100, &[false, true, false]).unwrap();
        let s = classify_leaves(&t);
        assert_eq!(s.forced, 2);
        assert_eq!(t.len(), 4);
    }

    #[test]
    fn cycle_involved_examples() {
        assert!(cycle_involved_nodes(&graph(4, &[(0, 1), (1, 2), (1, 3)])).is_empty());
        assert_eq!(cycle_involved_nodes(&triangle()), vec![0, 1, 2]);
        assert_eq!(cycle_involved_nodes(&graph(4, &[(0, 1), (1, 2), (0, 2), (0, 3)])), vec![0, 1, 2]);
        // two cycles joined by a bridge
        let m = graph(7, &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 6), (6, 4)]);
        assert_eq!(cycle_involved_nodes(&m), vec![0, 1, 2, 4, 5, 6]);
    }

    fn random_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
        (2usize..=7).prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
            let k = pairs.len();
            (Just(n), proptest::collection::vec(proptest::bool::weighted(0.45), k)).prop_map(move |(n, keep)| {
                (n, pairs.iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| *p).collect())
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn saw_tree_invariants((n, edges) in random_graph(), root in 0usize..7) {
            let m = graph(n, &edges);
            let v = root % n;
            let saw = build_saw_tree(&m, v, 1_000_000).unwrap();
            prop_assert_eq!(saw.root().gamma, v);
            prop_assert!(saw.depth() <= n + 1);
            prop_assert!(!saw.is_truncated());
            for (id, node) in saw.nodes().iter().enumerate() {
                let w = saw.walk(id);
                if w.len() >= 3 {
                    prop_assert_ne!(w[w.len() - 1], w[w.len() - 3]);
                }
                let head: BTreeSet<_> = w[..w.len() - 1].iter().collect();
                prop_assert_eq!(head.len(), w.len() - 1);
                let revisits = w[..w.len() - 1].contains(w.last().unwrap());
                prop_assert_eq!(node.kind == NodeKind::CycleInduced, revisits);
                if node.kind == NodeKind::DeadEnd {
                    prop_assert!(node.children.is_empty());
                    let back = node.parent.map(|p| saw.node(p).gamma);
                    prop_assert!(m.neighbors(node.gamma).iter().all(|nb| Some(nb.node) == back));
                }
            }
            // complete SAW tree is a subtree of the Bethe tree of matching depth
            let bethe = build_bethe_tree(&m, v, saw.depth().max(1), 5_000_000).unwrap();
            prop_assert!(walks(&saw).is_subset(&walks(&bethe)));
            // deterministic and stable past |V|
            prop_assert_eq!(&saw, &build_saw_tree(&m, v, 2_000_000).unwrap());
        }

        #[test]
        fn cycle_involved_matches_saw_leaves((n, edges) in random_graph()) {
            let m = graph(n, &edges);
            let mut from_trees = BTreeSet::new();
            for v in 0..n {
                let s = classify_leaves(&build_saw_tree(&m, v, 1_000_000).unwrap());
                from_trees.extend((0..n).filter(|&x| s.cycle_involved[x]));
            }
            let direct: BTreeSet<usize> = cycle_involved_nodes(&m).into_iter().collect();
            prop_assert_eq!(direct, from_trees);
        }

        #[test]
        fn bethe_walks_do_not_backtrack((n, edges) in random_graph(), depth in 1usize..5) {
            let m = graph(n, &edges);
            let t = build_bethe_tree(&m, 0, depth, 1_000_000).unwrap();
            for id in 0..t.len() {
                let w = t.walk(id);
                for i in 2..w.len() {
                    prop_assert_ne!(w[i], w[i - 2]);
                }
                prop_assert!(w.len() <= depth + 1);
            }
        }
    }
}
