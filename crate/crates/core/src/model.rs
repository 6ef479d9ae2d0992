//! Discrete pairwise Markov random fields.
//!
//! A [`Model`] is an undirected simple graph with a finite domain per node and
//! a strictly positive table per edge. The joint is the product of the edge
//! tables; unary evidence is folded into an incident edge at build time so the
//! factorization stays pairwise.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};

/// A strictly positive `rows x cols` table, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTable {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl PotentialTable {
    /// Builds a table from row-major data. Positivity is checked by model
    /// validation, not here.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch { left: data.len(), right: rows * cols });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::LengthMismatch { left: r.len(), right: cols });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    /// Constant table of ones.
    pub fn uniform(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![1.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        Self { rows: self.cols, cols: self.rows, data }
    }

    /// Multiplies row `i` by `f[i]`.
    pub fn scale_rows(&mut self, f: &[f64]) {
        for (i, &s) in f.iter().enumerate().take(self.rows) {
            for x in &mut self.data[i * self.cols..(i + 1) * self.cols] {
                *x *= s;
            }
        }
    }

    /// Multiplies column `j` by `f[j]`.
    pub fn scale_cols(&mut self, f: &[f64]) {
        for row in self.data.chunks_mut(self.cols.max(1)) {
            for (x, &s) in row.iter_mut().zip(f) {
                *x *= s;
            }
        }
    }

    /// Elementwise power, i.e. geometric interpolation toward the constant table.
    pub fn powf(&self, t: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x.powf(t)).collect() }
    }

    fn first_nonpositive(&self) -> Option<(usize, usize, f64)> {
        self.data
            .iter()
            .position(|&x| !(x > 0.0 && x.is_finite()))
            .map(|k| (k / self.cols.max(1), k % self.cols.max(1), self.data[k]))
    }

    /// `ln d(psi)`, i.e. a quarter of the largest log cross-ratio
    /// `ln psi(a,b) + ln psi(c,d) - ln psi(a,d) - ln psi(c,b)`.
    ///
    /// The quadruple maximum splits into `max_{a,c} [max_b (L_ab - L_cb) + max_d (L_cd - L_ad)]`,
    /// which is evaluated in log space so extreme tables do not overflow.
    pub fn log_strength(&self) -> Result<f64> {
        if let Some((_, _, v)) = self.first_nonpositive() {
            return Err(Error::NonPositive(v));
        }
        let logs: Vec<f64> = self.data.iter().map(|x| x.ln()).collect();
        let l = |i: usize, j: usize| logs[i * self.cols + j];
        let mut best = 0.0f64;
        for a in 0..self.rows {
            for c in 0..self.rows {
                if a == c {
                    continue;
                }
                let mut up = f64::NEG_INFINITY;
                let mut down = f64::NEG_INFINITY;
                for b in 0..self.cols {
                    up = up.max(l(a, b) - l(c, b));
                    down = down.max(l(c, b) - l(a, b));
                }
                best = best.max(up + down);
            }
        }
        Ok(best / 4.0)
    }

    /// Potential strength `d(psi) >= 1`; equals 1 exactly for rank-one tables
    /// up to rounding.
    pub fn strength(&self) -> Result<f64> {
        self.log_strength().map(f64::exp)
    }
}

/// `d(psi)` of a table; fails on a nonpositive entry.
pub fn potential_strength(table: &PotentialTable) -> Result<f64> {
    table.strength()
}

/// An adjacent node together with the connecting edge index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbor {
    pub node: usize,
    pub edge: usize,
}

/// A single broken model invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ZeroCardinality { node: usize },
    EdgeOutOfRange { edge: usize, u: usize, v: usize },
    SelfLoop { edge: usize, node: usize },
    DuplicateEdge { edge: usize, u: usize, v: usize },
    TableShape { edge: usize, expected: (usize, usize), found: (usize, usize) },
    NonPositivePotential { edge: usize, row: usize, col: usize, value: f64 },
    UnaryOutOfRange { node: usize },
    UnaryShape { node: usize, expected: usize, found: usize },
    NonPositiveUnary { node: usize, index: usize, value: f64 },
    DuplicateUnary { node: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::ZeroCardinality { node } => write!(f, "node {node} has cardinality 0"),
            Violation::EdgeOutOfRange { edge, u, v } => {
                write!(f, "edge {edge} ({u}, {v}) references a missing node")
            }
            Violation::SelfLoop { edge, node } => write!(f, "edge {edge} is a self-loop on node {node}"),
            Violation::DuplicateEdge { edge, u, v } => write!(f, "edge {edge} ({u}, {v}) is a duplicate"),
            Violation::TableShape { edge, expected, found } => write!(
                f,
                "edge {edge} table is {}x{}, expected {}x{}",
                found.0, found.1, expected.0, expected.1
            ),
            Violation::NonPositivePotential { edge, row, col, value } => {
                write!(f, "edge {edge} entry ({row}, {col}) = {value} is not strictly positive")
            }
            Violation::UnaryOutOfRange { node } => write!(f, "unary on missing node {node}"),
            Violation::UnaryShape { node, expected, found } => {
                write!(f, "unary on node {node} has {found} entries, expected {expected}")
            }
            Violation::NonPositiveUnary { node, index, value } => {
                write!(f, "unary on node {node} entry {index} = {value} is not strictly positive")
            }
            Violation::DuplicateUnary { node } => write!(f, "node {node} has more than one unary"),
        }
    }
}

/// Checks the raw parts of a model and returns every violation found.
pub fn validate_parts(
    cards: &[usize],
    edges: &[(usize, usize)],
    tables: &[PotentialTable],
    unaries: &[(usize, Vec<f64>)],
) -> Vec<Violation> {
    let n = cards.len();
    let mut out = Vec::new();
    for (node, &k) in cards.iter().enumerate() {
        if k == 0 {
            out.push(Violation::ZeroCardinality { node });
        }
    }
    let mut seen = HashSet::new();
    for (edge, &(u, v)) in edges.iter().enumerate() {
        if u >= n || v >= n {
            out.push(Violation::EdgeOutOfRange { edge, u, v });
            continue;
        }
        if u == v {
            out.push(Violation::SelfLoop { edge, node: u });
        } else if !seen.insert((u.min(v), u.max(v))) {
            out.push(Violation::DuplicateEdge { edge, u, v });
        }
        let Some(t) = tables.get(edge) else {
            out.push(Violation::TableShape { edge, expected: (cards[u], cards[v]), found: (0, 0) });
            continue;
        };
        if t.shape() != (cards[u], cards[v]) {
            out.push(Violation::TableShape { edge, expected: (cards[u], cards[v]), found: t.shape() });
        }
        if let Some((row, col, value)) = t.first_nonpositive() {
            out.push(Violation::NonPositivePotential { edge, row, col, value });
        }
    }
    let mut with_unary = HashSet::new();
    for (node, f) in unaries {
        let node = *node;
        if node >= n {
            out.push(Violation::UnaryOutOfRange { node });
            continue;
        }
        if !with_unary.insert(node) {
            out.push(Violation::DuplicateUnary { node });
        }
        if f.len() != cards[node] {
            out.push(Violation::UnaryShape { node, expected: cards[node], found: f.len() });
        }
        if let Some(index) = f.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
            out.push(Violation::NonPositiveUnary { node, index, value: f[index] });
        }
    }
    out
}

/// An immutable pairwise MRF.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    cards: Vec<usize>,
    edges: Vec<(usize, usize)>,
    tables: Vec<PotentialTable>,
    // Only isolated nodes keep a unary; all others are folded into an edge.
    node_unary: Vec<Option<Vec<f64>>>,
    adjacency: Vec<Vec<Neighbor>>,
    log_strengths: Vec<f64>,
}

impl Model {
    /// Builds a model with no unary tables.
    pub fn new(cards: Vec<usize>, edges: Vec<(usize, usize)>, tables: Vec<PotentialTable>) -> Result<Self> {
        Self::with_unaries(cards, edges, tables, Vec::new())
    }

    /// Builds a model, folding each unary into the lowest-indexed edge
    /// incident to its node. Isolated nodes keep their unary.
    pub fn with_unaries(
        cards: Vec<usize>,
        edges: Vec<(usize, usize)>,
        mut tables: Vec<PotentialTable>,
        unaries: Vec<(usize, Vec<f64>)>,
    ) -> Result<Self> {
        let violations = validate_parts(&cards, &edges, &tables, &unaries);
        if !violations.is_empty() {
            return Err(Error::Invalid(violations));
        }
        tables.truncate(edges.len());
        let mut node_unary = vec![None; cards.len()];
        for (node, f) in unaries {
            match edges.iter().position(|&(u, v)| u == node || v == node) {
                Some(e) if edges[e].0 == node => tables[e].scale_rows(&f),
                Some(e) => tables[e].scale_cols(&f),
                None => node_unary[node] = Some(f),
            }
        }
        Ok(Self::assemble(cards, edges, tables, node_unary))
    }

    fn assemble(
        cards: Vec<usize>,
        edges: Vec<(usize, usize)>,
        tables: Vec<PotentialTable>,
        node_unary: Vec<Option<Vec<f64>>>,
    ) -> Self {
        let mut adjacency = vec![Vec::new(); cards.len()];
        for (edge, &(u, v)) in edges.iter().enumerate() {
            adjacency[u].push(Neighbor { node: v, edge });
            adjacency[v].push(Neighbor { node: u, edge });
        }
        for adj in &mut adjacency {
            adj.sort_by_key(|n| n.node);
        }
        let log_strengths = tables
            .iter()
            .map(|t| t.log_strength().expect("validated tables are positive"))
            .collect();
        Self { cards, edges, tables, node_unary, adjacency, log_strengths }
    }

    pub fn builder(cards: Vec<usize>) -> ModelBuilder {
        ModelBuilder::new(cards)
    }

    pub fn node_count(&self) -> usize {
        self.cards.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn cardinality(&self, node: usize) -> usize {
        self.cards[node]
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cards
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn table(&self, edge: usize) -> &PotentialTable {
        &self.tables[edge]
    }

    /// Neighbors of `node`, ascending by neighbor index.
    pub fn neighbors(&self, node: usize) -> &[Neighbor] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        let adj = self.adjacency.get(u)?;
        adj.binary_search_by_key(&v, |n| n.node).ok().map(|i| adj[i].edge)
    }

    /// `psi(x_from = a, x_to = b)` for `edge`, read in the direction `from -> other`.
    #[inline]
    pub fn potential(&self, edge: usize, from: usize, a: usize, b: usize) -> f64 {
        if self.edges[edge].0 == from {
            self.tables[edge].get(a, b)
        } else {
            self.tables[edge].get(b, a)
        }
    }

    /// The table of `edge` oriented so rows index `from`'s states.
    pub fn oriented_table(&self, edge: usize, from: usize) -> PotentialTable {
        if self.edges[edge].0 == from {
            self.tables[edge].clone()
        } else {
            self.tables[edge].transpose()
        }
    }

    pub fn log_strength(&self, edge: usize) -> f64 {
        self.log_strengths[edge]
    }

    pub fn strength(&self, edge: usize) -> f64 {
        self.log_strengths[edge].exp()
    }

    pub fn max_strength(&self) -> f64 {
        self.log_strengths.iter().fold(0.0f64, |a, &b| a.max(b)).exp()
    }

    /// Unary of an isolated node, if one was supplied.
    pub fn isolated_unary(&self, node: usize) -> Option<&[f64]> {
        self.node_unary[node].as_deref()
    }

    pub(crate) fn check_node(&self, node: usize) -> Result<()> {
        if node < self.node_count() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange { node, count: self.node_count() })
        }
    }

    pub(crate) fn check_assignment(&self, x: &[usize]) -> Result<()> {
        if x.len() != self.node_count() {
            return Err(Error::AssignmentLength { expected: self.node_count(), found: x.len() });
        }
        for (node, (&state, &cardinality)) in x.iter().zip(&self.cards).enumerate() {
            if state >= cardinality {
                return Err(Error::StateOutOfRange { node, state, cardinality });
            }
        }
        Ok(())
    }

    /// Product of all edge potentials (and isolated-node unaries) at `x`.
    pub fn unnormalized_joint(&self, x: &[usize]) -> Result<f64> {
        self.check_assignment(x)?;
        Ok(self.joint_unchecked(x))
    }

    #[inline]
    pub(crate) fn joint_unchecked(&self, x: &[usize]) -> f64 {
        let mut p = 1.0;
        for (t, &(u, v)) in self.tables.iter().zip(&self.edges) {
            p *= t.get(x[u], x[v]);
        }
        for (f, &s) in self.node_unary.iter().zip(x) {
            if let Some(f) = f {
                p *= f[s];
            }
        }
        p
    }

    /// Conditions on `evidence` by slicing each observed node's domain to
    /// its observed state. Potentials never acquire zeros, so strengths stay
    /// finite; untouched edges are unchanged.
    pub fn restrict_evidence(&self, evidence: &[(usize, usize)]) -> Result<Model> {
        let mut observed: Vec<Option<usize>> = vec![None; self.node_count()];
        for &(node, state) in evidence {
            self.check_node(node)?;
            if state >= self.cards[node] {
                return Err(Error::StateOutOfRange { node, state, cardinality: self.cards[node] });
            }
            observed[node] = Some(state);
        }
        let cards = self
            .cards
            .iter()
            .zip(&observed)
            .map(|(&k, o)| if o.is_some() { 1 } else { k })
            .collect();
        let tables = self
            .edges
            .iter()
            .zip(&self.tables)
            .map(|(&(u, v), t)| match (observed[u], observed[v]) {
                (None, None) => t.clone(),
                (su, sv) => {
                    let rows: Vec<usize> = su.map_or_else(|| (0..t.rows()).collect(), |s| vec![s]);
                    let cols: Vec<usize> = sv.map_or_else(|| (0..t.cols()).collect(), |s| vec![s]);
                    let data = rows.iter().flat_map(|&i| cols.iter().map(move |&j| t.get(i, j))).collect();
                    PotentialTable { rows: rows.len(), cols: cols.len(), data }
                }
            })
            .collect();
        let node_unary = self
            .node_unary
            .iter()
            .zip(&observed)
            .map(|(f, o)| match (f, o) {
                (Some(f), Some(s)) => Some(vec![f[*s]]),
                (f, _) => f.clone(),
            })
            .collect();
        Ok(Self::assemble(cards, self.edges.clone(), tables, node_unary))
    }

    /// Re-checks every invariant; empty for any model built through this API.
    pub fn validate(&self) -> Vec<Violation> {
        let unaries: Vec<(usize, Vec<f64>)> = self
            .node_unary
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f.clone().map(|f| (i, f)))
            .collect();
        validate_parts(&self.cards, &self.edges, &self.tables, &unaries)
    }

    /// Whether the graph is a forest.
    pub fn is_forest(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.node_count()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(u, v) in &self.edges {
            let (a, b) = (find(&mut parent, u), find(&mut parent, v));
            if a == b {
                return false;
            }
            parent[a] = b;
        }
        true
    }
}

/// Incremental construction of a [`Model`].
#[derive(Debug, Clone, Default)]
pub struct ModelBuilder {
    cards: Vec<usize>,
    edges: Vec<(usize, usize)>,
    tables: Vec<PotentialTable>,
    unaries: Vec<(usize, Vec<f64>)>,
}

impl ModelBuilder {
    pub fn new(cards: Vec<usize>) -> Self {
        Self { cards, ..Default::default() }
    }

    /// Adds edge `(u, v)` with `table[i][j] = psi(x_u = i, x_v = j)`.
    pub fn edge(mut self, u: usize, v: usize, table: PotentialTable) -> Self {
        self.edges.push((u, v));
        self.tables.push(table);
        self
    }

    /// Adds an edge from nested rows. Ragged rows produce an empty table that
    /// fails validation in [`build`](Self::build).
    pub fn edge_rows<R: AsRef<[f64]>>(self, u: usize, v: usize, rows: &[R]) -> Self {
        let table = PotentialTable::from_rows(rows).unwrap_or_else(|_| PotentialTable::uniform(0, 0));
        self.edge(u, v, table)
    }

    pub fn unary(mut self, node: usize, f: Vec<f64>) -> Self {
        self.unaries.push((node, f));
        self
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_parts(&self.cards, &self.edges, &self.tables, &self.unaries)
    }

    pub fn build(self) -> Result<Model> {
        Model::with_unaries(self.cards, self.edges, self.tables, self.unaries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent check: every quadruple, linear space.
    fn strength_bruteforce(t: &PotentialTable) -> f64 {
        let mut best = 0.0f64;
        for a in 0..t.rows() {
            for b in 0..t.cols() {
                for c in 0..t.rows() {
                    for d in 0..t.cols() {
                        best = best.max(t.get(a, b) * t.get(c, d) / (t.get(a, d) * t.get(c, b)));
                    }
                }
            }
        }
        best.powf(0.25)
    }

    fn tri(table: &[[f64; 2]; 2]) -> Model {
        Model::builder(vec![2, 2, 2])
            .edge_rows(0, 1, table)
            .edge_rows(1, 2, table)
            .edge_rows(0, 2, table)
            .build()
            .unwrap()
    }

    #[test]
    fn strength_examples() {
        let t = PotentialTable::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert_eq!(t.strength().unwrap(), 1.0);
        let t = PotentialTable::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        assert!((strength_bruteforce(&t) - 2f64.sqrt()).abs() < 1e-12);
        assert!((t.strength().unwrap() - 2f64.sqrt()).abs() < 1e-12);
        let t = PotentialTable::from_rows(&[[2.0, 0.5], [0.5, 2.0]]).unwrap();
        assert!((strength_bruteforce(&t) - 2.0).abs() < 1e-12);
        assert!((t.strength().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn strength_rejects_nonpositive() {
        let t = PotentialTable::from_rows(&[[2.0, 0.0], [1.0, 2.0]]).unwrap();
        assert!(matches!(potential_strength(&t), Err(Error::NonPositive(_))));
    }

    #[test]
    fn joint_examples() {
        let empty = Model::new(vec![2, 3], vec![], vec![]).unwrap();
        assert_eq!(empty.unnormalized_joint(&[1, 2]).unwrap(), 1.0);
        let pair = Model::builder(vec![2, 2]).edge_rows(0, 1, &[[3.0, 1.0], [1.0, 1.0]]).build().unwrap();
        assert_eq!(pair.unnormalized_joint(&[0, 0]).unwrap(), 3.0);
        let t = tri(&[[2.0, 1.0], [1.0, 2.0]]);
        assert_eq!(t.unnormalized_joint(&[0, 0, 0]).unwrap(), 8.0);
        assert!(matches!(t.unnormalized_joint(&[0, 2, 0]), Err(Error::StateOutOfRange { node: 1, .. })));
        assert!(matches!(t.unnormalized_joint(&[0, 0]), Err(Error::AssignmentLength { .. })));
    }

    #[test]
    fn evidence_slices_domains() {
        let pair = Model::builder(vec![2, 2]).edge_rows(0, 1, &[[3.0, 1.0], [1.0, 1.0]]).build().unwrap();
        assert_eq!(pair.restrict_evidence(&[]).unwrap(), pair);
        let r = pair.restrict_evidence(&[(1, 0)]).unwrap();
        assert_eq!(r.cardinalities(), &[2, 1]);
        assert_eq!(r.table(0), &PotentialTable::from_rows(&[[3.0], [1.0]]).unwrap());

        let t = tri(&[[2.0, 1.0], [1.0, 3.0]]);
        let full = t.restrict_evidence(&[(0, 1), (1, 0), (2, 1)]).unwrap();
        assert_eq!(full.unnormalized_joint(&[0, 0, 0]).unwrap(), t.unnormalized_joint(&[1, 0, 1]).unwrap());
        assert!(t.restrict_evidence(&[(0, 2)]).is_err());
        assert!(t.restrict_evidence(&[(5, 0)]).is_err());
    }

    #[test]
    fn evidence_keeps_untouched_strengths() {
        let m = Model::builder(vec![2, 3, 2])
            .edge_rows(0, 1, &[[1.0, 2.0, 3.0], [3.0, 1.0, 0.5]])
            .edge_rows(1, 2, &[[1.0, 4.0], [2.0, 1.0], [1.0, 1.0]])
            .build()
            .unwrap();
        let r = m.restrict_evidence(&[(0, 1)]).unwrap();
        assert_eq!(r.log_strength(1), m.log_strength(1));
        assert_eq!(r.log_strength(0), 0.0);
    }

    #[test]
    fn unary_folding() {
        let m = Model::builder(vec![2, 2, 2])
            .edge_rows(1, 2, &[[1.0, 2.0], [3.0, 4.0]])
            .edge_rows(0, 2, &[[1.0, 1.0], [1.0, 1.0]])
            .unary(2, vec![2.0, 5.0])
            .unary(0, vec![7.0, 1.0])
            .build()
            .unwrap();
        // node 2's lowest-indexed incident edge is edge 0, where it is the column.
        assert_eq!(m.table(0), &PotentialTable::from_rows(&[[2.0, 10.0], [6.0, 20.0]]).unwrap());
        assert_eq!(m.table(1), &PotentialTable::from_rows(&[[7.0, 7.0], [1.0, 1.0]]).unwrap());

        let iso = Model::builder(vec![3]).unary(0, vec![1.0, 2.0, 3.0]).build().unwrap();
        assert_eq!(iso.isolated_unary(0), Some(&[1.0, 2.0, 3.0][..]));
        assert_eq!(iso.unnormalized_joint(&[2]).unwrap(), 3.0);
    }

    #[test]
    fn validation_reports_everything() {
        assert!(tri(&[[2.0, 1.0], [1.0, 2.0]]).validate().is_empty());
        let b = Model::builder(vec![2, 2, 0])
            .edge_rows(0, 1, &[[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]])
            .edge_rows(1, 1, &[[1.0, 1.0], [1.0, 1.0]])
            .edge_rows(1, 0, &[[1.0, -1.0], [1.0, 1.0]])
            .edge_rows(0, 7, &[[1.0]]);
        let v = b.validate();
        assert!(v.contains(&Violation::ZeroCardinality { node: 2 }));
        assert!(v.iter().any(|x| matches!(x, Violation::TableShape { edge: 0, .. })));
        assert!(v.contains(&Violation::SelfLoop { edge: 1, node: 1 }));
        assert!(v.contains(&Violation::DuplicateEdge { edge: 2, u: 1, v: 0 }));
        assert!(v.iter().any(|x| matches!(x, Violation::NonPositivePotential { edge: 2, row: 0, col: 1, .. })));
        assert!(v.contains(&Violation::EdgeOutOfRange { edge: 3, u: 0, v: 7 }));
        assert!(matches!(b.build(), Err(Error::Invalid(list)) if list.len() == v.len()));
    }

    #[test]
    fn oriented_access_transposes() {
        let m = Model::builder(vec![2, 3]).edge_rows(0, 1, &[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).build().unwrap();
        assert_eq!(m.potential(0, 0, 1, 2), 6.0);
        assert_eq!(m.potential(0, 1, 2, 1), 6.0);
        assert_eq!(m.oriented_table(0, 1), m.table(0).transpose());
        assert_eq!(m.edge_between(1, 0), Some(0));
        assert_eq!(m.edge_between(1, 1), None);
    }

    fn table_strategy() -> impl Strategy<Value = PotentialTable> {
        (1usize..=4, 1usize..=4).prop_flat_map(|(r, c)| {
            proptest::collection::vec(0.05f64..20.0, r * c)
                .prop_map(move |d| PotentialTable::new(r, c, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn strength_matches_bruteforce(t in table_strategy()) {
            let fast = t.strength().unwrap();
            let slow = strength_bruteforce(&t);
            prop_assert!((fast - slow).abs() <= 1e-9 * slow);
            prop_assert!(fast >= 1.0);
        }

        #[test]
        fn strength_transpose_invariant(t in table_strategy()) {
            let a = t.log_strength().unwrap();
            let b = t.transpose().log_strength().unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn strength_diagonal_scaling_invariant(
            t in table_strategy(),
            f in proptest::collection::vec(0.01f64..100.0, 4),
            g in proptest::collection::vec(0.01f64..100.0, 4),
        ) {
            let mut s = t.clone();
            s.scale_rows(&f[..t.rows()]);
            s.scale_cols(&g[..t.cols()]);
            prop_assert!((s.log_strength().unwrap() - t.log_strength().unwrap()).abs() < 1e-9);
        }

        #[test]
        fn rank_one_has_unit_strength(
            f in proptest::collection::vec(0.01f64..100.0, 1..=3),
            g in proptest::collection::vec(0.01f64..100.0, 1..=3),
        ) {
            let data = f.iter().flat_map(|a| g.iter().map(move |b| a * b)).collect();
            let t = PotentialTable::new(f.len(), g.len(), data).unwrap();
            prop_assert!(t.log_strength().unwrap() < 1e-12);
            prop_assert!((strength_bruteforce(&t) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn joint_multiplies_over_disjoint_union(
            a in proptest::collection::vec(0.1f64..5.0, 4),
            b in proptest::collection::vec(0.1f64..5.0, 4),
            x in proptest::collection::vec(0usize..2, 4),
        ) {
            let ta = PotentialTable::new(2, 2, a).unwrap();
            let tb = PotentialTable::new(2, 2, b).unwrap();
            let left = Model::builder(vec![2, 2]).edge(0, 1, ta.clone()).build().unwrap();
            let right = Model::builder(vec![2, 2]).edge(0, 1, tb.clone()).build().unwrap();
            let both = Model::builder(vec![2; 4]).edge(0, 1, ta).edge(2, 3, tb).build().unwrap();
            let lhs = both.unnormalized_joint(&x).unwrap();
            let rhs = left.unnormalized_joint(&x[..2]).unwrap() * right.unnormalized_joint(&x[2..]).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        }
    }

    #[test]
    fn nonnegative_rank_test_2x2_and_3x3() {
        // non-rank-one tables always exceed 1
        let t = PotentialTable::from_rows(&[[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [1.0, 1.0, 1.0]]).unwrap();
        assert!(t.strength().unwrap() > 1.0);
        let t = PotentialTable::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert!(t.log_strength().unwrap().abs() < 1e-15);
    }
}
