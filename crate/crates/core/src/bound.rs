//! Dynamic-range error bounds on unrolled trees and the probability intervals
//! derived from them.
//!
//! All bounds are dynamic ranges `d(f/g) >= 1` (see [`crate::bp::dynamic_range`]).
//! An unknown external force at a tree node makes its incoming error
//! unbounded; pushing that error through an edge of strength `d(psi)`
//! contracts it to at most `(d(psi)^2 d + 1) / (d(psi)^2 + d)`, and errors
//! arriving from different children multiply. Evaluating this bottom-up on
//! the self-avoiding-walk tree of `v`, with every cycle-induced leaf unknown,
//! bounds the dynamic range between the BP belief at `v` and the true
//! marginal of `v`.

use std::fmt;
use std::io::Write;
use std::ops::Mul;

use crate::bp::{log_dynamic_range, BpReport};
use crate::error::Result;
use crate::model::Model;
use crate::oracle::ExactMarginals;
use crate::par;
use crate::tree::{build_bethe_tree, build_saw_tree_with_unknown, NodeKind, UnrolledTree};

/// A dynamic-range bound in `[1, inf]`, stored as its logarithm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DeltaBound {
    log: f64,
}

impl DeltaBound {
    pub const ONE: Self = Self { log: 0.0 };
    pub const INFINITY: Self = Self { log: f64::INFINITY };

    /// From a linear value; anything below 1 is clamped to 1.
    pub fn from_value(d: f64) -> Self {
        Self::from_log(d.ln())
    }

    pub fn from_log(log: f64) -> Self {
        if log.is_nan() {
            return Self::INFINITY;
        }
        Self { log: log.max(0.0) }
    }

    pub fn value(self) -> f64 {
        self.log.exp()
    }

    pub fn log_value(self) -> f64 {
        self.log
    }

    pub fn is_infinite(self) -> bool {
        self.log == f64::INFINITY
    }

    /// `D = delta^2`, the bound on the ratio `(p_a/m_a)/(p_b/m_b)`.
    pub fn squared(self) -> f64 {
        (2.0 * self.log).exp()
    }
}

impl Mul for DeltaBound {
    type Output = Self;

    #[allow(clippy::suspicious_arithmetic_impl)] // stored as logs
    fn mul(self, rhs: Self) -> Self {
        Self { log: self.log + rhs.log }
    }
}

impl fmt::Display for DeltaBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Error contraction across an edge of strength `d_psi`:
/// `(d_psi^2 d_e + 1) / (d_psi^2 + d_e)`, which tends to `d_psi^2` as `d_e -> inf`.
pub fn contract(d_psi: f64, d_e: DeltaBound) -> DeltaBound {
    contract_log(d_psi.max(1.0).ln(), d_e)
}

/// [`contract`] with the strength given as `ln d_psi`.
///
/// Evaluated as `ln(1 + (D - 1)(d_e - 1) / (D + d_e))` with `D = d_psi^2`, which
/// keeps full relative precision when either argument is close to 1.
pub fn contract_log(log_d_psi: f64, d_e: DeltaBound) -> DeltaBound {
    let two_log = 2.0 * log_d_psi.max(0.0);
    if d_e.is_infinite() {
        return DeltaBound::from_log(two_log);
    }
    let d_e_lin = d_e.log.exp();
    let big_d = two_log.exp();
    if !d_e_lin.is_finite() || !big_d.is_finite() {
        return DeltaBound::from_log(two_log.min(d_e.log));
    }
    let frac = two_log.exp_m1() * d_e.log.exp_m1() / (big_d + d_e_lin);
    DeltaBound::from_log(frac.ln_1p())
}

/// Evaluates the bound recursion bottom-up and returns the root value.
///
/// `in_s[i]` marks tree node `i` as carrying an unknown force (`inf`); other
/// leaves contribute no error (`1`); an internal node multiplies the
/// contracted bounds of its children.
pub fn tree_delta_recursion(model: &Model, tree: &UnrolledTree, in_s: &[bool]) -> DeltaBound {
    let nodes = tree.nodes();
    let mut delta = vec![DeltaBound::ONE; nodes.len()];
    for id in (0..nodes.len()).rev() {
        let node = &nodes[id];
        delta[id] = if in_s.get(id).copied().unwrap_or(false) {
            DeltaBound::INFINITY
        } else {
            node.children.iter().fold(DeltaBound::ONE, |acc, &c| {
                let e = nodes[c].edge.expect("non-root node has an edge");
                acc * contract_log(model.log_strength(e), delta[c])
            })
        };
    }
    delta[0]
}

/// Vertices whose forcing functions are unknown.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ForcingSpec {
    pub unknown: Vec<usize>,
}

impl ForcingSpec {
    pub fn none() -> Self {
        Self::default()
    }

    fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &v in &self.unknown {
            if v < n {
                m[v] = true;
            }
        }
        m
    }
}

fn unknown_mask(tree: &UnrolledTree) -> Vec<bool> {
    tree.nodes()
        .iter()
        .map(|n| matches!(n.kind, NodeKind::CycleInduced | NodeKind::Truncated | NodeKind::Forced))
        .collect()
}

/// Bound on `d(p(x_v) / belief_v)` from the SAW tree of `v`.
///
/// Cycle-induced leaves, budget-truncated leaves and nodes visiting a vertex
/// in `forcing.unknown` are all unknown. A small budget only loosens the
/// bound; `budget = 1` gives `inf`.
pub fn saw_accuracy_bound(model: &Model, v: usize, budget: usize, forcing: &ForcingSpec) -> Result<DeltaBound> {
    let tree = build_saw_tree_with_unknown(model, v, budget, &forcing.mask(model.node_count()))?;
    Ok(tree_delta_recursion(model, &tree, &unknown_mask(&tree)))
}

/// Bound on the dynamic range between beliefs at `v` after `n` BP sweeps
/// from any two initializations, from the depth-`n` Bethe tree.
pub fn bethe_convergence_bound(model: &Model, v: usize, n: usize, budget: usize) -> Result<DeltaBound> {
    let tree = build_bethe_tree(model, v, n, budget)?;
    Ok(tree_delta_recursion(model, &tree, &unknown_mask(&tree)))
}

/// Interval for a single probability `m` whose distribution is within
/// dynamic range `delta` of the truth:
/// `[m / (m + D (1 - m)), D m / (D m + 1 - m)]` with `D = delta^2`.
///
/// Both endpoints are attained by two-state pairs at distance exactly `delta`.
pub fn interval_from_bound(m: f64, delta: DeltaBound) -> (f64, f64) {
    let m = m.clamp(0.0, 1.0);
    if delta == DeltaBound::ONE {
        return (m, m);
    }
    let big_d = delta.squared();
    let (lower, upper) = if big_d.is_infinite() {
        (if m >= 1.0 { 1.0 } else { 0.0 }, if m <= 0.0 { 0.0 } else { 1.0 })
    } else {
        (m / (m + big_d * (1.0 - m)), big_d * m / (big_d * m + (1.0 - m)))
    };
    (lower.clamp(0.0, m), upper.clamp(m, 1.0))
}

/// Which nodes to report.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum Roots {
    #[default]
    All,
    List(Vec<usize>),
}

impl Roots {
    pub fn resolve(&self, n: usize) -> Vec<usize> {
        match self {
            Roots::All => (0..n).collect(),
            Roots::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IntervalOptions {
    pub budget: usize,
    pub forcing: ForcingSpec,
    pub roots: Roots,
}

impl Default for IntervalOptions {
    fn default() -> Self {
        Self { budget: crate::DEFAULT_BUDGET, forcing: ForcingSpec::none(), roots: Roots::All }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRow {
    pub node: usize,
    pub state: usize,
    pub belief: f64,
    pub lower: f64,
    pub upper: f64,
    pub delta: DeltaBound,
    pub exact: Option<f64>,
}

impl IntervalRow {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Whether the exact value (if attached) lies within `[lower - slack, upper + slack]`.
    pub fn contains_exact(&self, slack: f64) -> Option<bool> {
        self.exact.map(|p| p >= self.lower - slack && p <= self.upper + slack)
    }
}

/// Per-node, per-state intervals around BP beliefs.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalReport {
    pub rows: Vec<IntervalRow>,
    /// Whether the BP run behind the beliefs converged; if not, the beliefs
    /// depend on the iteration they were taken from.
    pub converged: bool,
}

pub const CSV_HEADER: &str = "node,state,belief,lower,upper,delta,exact";

impl IntervalReport {
    pub fn attach_exact(&mut self, exact: &ExactMarginals) {
        for r in &mut self.rows {
            r.exact = Some(exact.marginals[r.node][r.state]);
        }
    }

    pub fn max_width(&self) -> f64 {
        self.rows.iter().map(IntervalRow::width).fold(0.0, f64::max)
    }

    pub fn mean_width(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(IntervalRow::width).sum::<f64>() / self.rows.len() as f64
    }

    /// `None` when no exact values are attached.
    pub fn all_contain_exact(&self, slack: f64) -> Option<bool> {
        self.rows.iter().map(|r| r.contains_exact(slack)).try_fold(true, |acc, c| c.map(|c| acc && c))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            let exact = r.exact.map(|x| x.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{},{},{},{}", r.node, r.state, r.belief, r.lower, r.upper, r.delta, exact)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

/// SAW bound and intervals for every requested node. Roots are independent
/// and evaluated in parallel; rows are ordered by (node, state).
pub fn marginal_intervals(model: &Model, report: &BpReport, opts: &IntervalOptions) -> Result<IntervalReport> {
    let roots = opts.roots.resolve(model.node_count());
    for &v in &roots {
        model.check_node(v)?;
    }
    let deltas = par::map_indexed(roots.len(), |i| saw_accuracy_bound(model, roots[i], opts.budget, &opts.forcing));
    let mut rows = Vec::new();
    for (&v, delta) in roots.iter().zip(deltas) {
        let delta = delta?;
        for (state, &belief) in report.beliefs[v].iter().enumerate() {
            let (lower, upper) = interval_from_bound(belief, delta);
            rows.push(IntervalRow { node: v, state, belief, lower, upper, delta, exact: None });
        }
    }
    Ok(IntervalReport { rows, converged: report.converged })
}

/// `d(exact / belief)` for one node, in the same units as [`DeltaBound`].
pub fn belief_error(exact: &[f64], belief: &[f64]) -> Result<DeltaBound> {
    log_dynamic_range(exact, belief).map(DeltaBound::from_log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bp::{dynamic_range, run_bp, BpOptions};
    use crate::model::ModelBuilder;
    use crate::tree::build_saw_tree;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn triangle() -> Model {
        let t = [[2.0, 1.0], [1.0, 2.0]];
        ModelBuilder::new(vec![2; 3]).edge_rows(0, 1, &t).edge_rows(1, 2, &t).edge_rows(0, 2, &t).build().unwrap()
    }

    #[test]
    fn contract_examples() {
        for d in [1.0, 1.5, 3.0, 40.0] {
            assert_eq!(contract(d, DeltaBound::ONE), DeltaBound::ONE);
        }
        for e in [1.0, 2.0, 1e6] {
            assert_eq!(contract(1.0, DeltaBound::from_value(e)), DeltaBound::ONE);
        }
        assert!(close(contract(2.0, DeltaBound::from_value(2.0)).value(), 1.5, 1e-14));
        assert!(close(contract(2f64.sqrt(), DeltaBound::INFINITY).value(), 2.0, 1e-14));
        assert!(close(contract(2f64.sqrt(), DeltaBound::from_value(1e300)).value(), 2.0, 1e-14));
    }

    #[test]
    fn recursion_examples() {
        let m = triangle();
        let t = build_saw_tree(&m, 0, 100).unwrap();
        assert_eq!(tree_delta_recursion(&m, &t, &[]), DeltaBound::ONE);

        let pair = ModelBuilder::new(vec![2, 2]).edge_rows(0, 1, &[[2.0, 1.0], [1.0, 2.0]]).build().unwrap();
        let t = build_saw_tree(&pair, 0, 10).unwrap();
        assert!(close(tree_delta_recursion(&pair, &t, &[false, true]).value(), 2.0, 1e-12));

        // each branch: inf -> 2 -> 5/4 -> 14/13
        let d = saw_accuracy_bound(&m, 0, 100, &ForcingSpec::none()).unwrap();
        assert!(close(d.value(), 196.0 / 169.0, 1e-12));
    }

    #[test]
    fn saw_bound_edge_cases() {
        let m = triangle();
        assert!(saw_accuracy_bound(&m, 1, 1, &ForcingSpec::none()).unwrap().is_infinite());
        let forced = ForcingSpec { unknown: vec![0] };
        assert!(saw_accuracy_bound(&m, 0, 100, &forced).unwrap().is_infinite());
        // forcing vertex 1 from root 0: branches 0-1 -> inf->2, 0-2-1 -> 2 -> 5/4
        let forced = ForcingSpec { unknown: vec![1] };
        assert!(close(saw_accuracy_bound(&m, 0, 100, &forced).unwrap().value(), 2.0 * 1.25, 1e-12));
        let path = ModelBuilder::new(vec![2, 3, 2])
            .edge_rows(0, 1, &[[2.0, 1.0, 3.0], [1.0, 2.0, 1.0]])
            .edge_rows(1, 2, &[[1.0, 5.0], [2.0, 1.0], [1.0, 1.0]])
            .build()
            .unwrap();
        for v in 0..3 {
            assert_eq!(saw_accuracy_bound(&path, v, 100, &ForcingSpec::none()).unwrap(), DeltaBound::ONE);
        }
    }

    #[test]
    fn bethe_examples() {
        let m = triangle();
        assert!(close(bethe_convergence_bound(&m, 0, 2, 1000).unwrap().value(), 25.0 / 16.0, 1e-12));
        assert!(close(bethe_convergence_bound(&m, 0, 3, 1000).unwrap().value(), 196.0 / 169.0, 1e-12));
        let b4 = bethe_convergence_bound(&m, 0, 4, 1000).unwrap().value();
        assert!(close(b4, (41.0f64 / 40.0).powi(2), 1e-12));
        assert!(b4 < saw_accuracy_bound(&m, 0, 100, &ForcingSpec::none()).unwrap().value());
        let path = ModelBuilder::new(vec![2; 3])
            .edge_rows(0, 1, &[[2.0, 1.0], [1.0, 2.0]])
            .edge_rows(1, 2, &[[2.0, 1.0], [1.0, 2.0]])
            .build()
            .unwrap();
        assert_eq!(bethe_convergence_bound(&path, 0, 2, 100).unwrap(), DeltaBound::ONE);
        assert!(bethe_convergence_bound(&path, 0, 1, 100).unwrap().value() > 1.0);
    }

    #[test]
    fn interval_examples() {
        assert_eq!(interval_from_bound(0.5, DeltaBound::ONE), (0.5, 0.5));
        let (lo, hi) = interval_from_bound(0.5, DeltaBound::from_value(2.0));
        assert!(close(lo, 0.2, 1e-12) && close(hi, 0.8, 1e-12));
        let (lo, hi) = interval_from_bound(0.5, DeltaBound::from_value(1.25));
        assert!(close(lo, 16.0 / 41.0, 1e-12) && close(hi, 25.0 / 41.0, 1e-12));
        assert_eq!(interval_from_bound(0.3, DeltaBound::INFINITY), (0.0, 1.0));
        assert_eq!(interval_from_bound(1.0, DeltaBound::INFINITY), (1.0, 1.0));
        // the witness pair sits exactly on both endpoints
        assert!(close(dynamic_range(&[0.8, 0.2], &[0.5, 0.5]).unwrap(), 2.0, 1e-12));
    }

    #[test]
    fn triangle_intervals() {
        let m = triangle();
        let r = run_bp(&m, &BpOptions::default());
        let rep = marginal_intervals(&m, &r, &IntervalOptions::default()).unwrap();
        assert_eq!(rep.rows.len(), 6);
        // delta = (14/13)^2, so D = 38416/28561 and the interval at 0.5 is [1/(1+D), D/(1+D)]
        for row in &rep.rows {
            assert!(close(row.delta.value(), 196.0 / 169.0, 1e-12));
            assert!(close(row.lower, 28561.0 / 66977.0, 1e-12));
            assert!(close(row.upper, 38416.0 / 66977.0, 1e-12));
        }
        let csv = rep.to_csv();
        assert!(csv.starts_with("node,state,belief,lower,upper,delta,exact\n0,0,0.5,"));
        assert!(csv.lines().nth(1).unwrap().ends_with(','));
    }

    #[test]
    fn tree_intervals_have_zero_width() {
        let m = ModelBuilder::new(vec![2, 3, 2])
            .edge_rows(0, 1, &[[2.0, 1.0, 3.0], [1.0, 2.0, 1.0]])
            .edge_rows(1, 2, &[[1.0, 5.0], [2.0, 1.0], [1.0, 1.0]])
            .build()
            .unwrap();
        let r = run_bp(&m, &BpOptions::default());
        let rep = marginal_intervals(&m, &r, &IntervalOptions::default()).unwrap();
        assert!(rep.rows.iter().all(|r| r.lower == r.belief && r.upper == r.belief));
        let rep = marginal_intervals(&m, &r, &IntervalOptions { roots: Roots::List(vec![1]), ..Default::default() }).unwrap();
        assert_eq!(rep.rows.len(), 3);
        assert!(marginal_intervals(&m, &r, &IntervalOptions { roots: Roots::List(vec![9]), ..Default::default() }).is_err());
    }

    proptest! {
        #[test]
        fn contract_bounded_and_monotone(
            d2 in 1.0f64..16.0, e in 1.0f64..64.0, dd in 0.0f64..1.0, de in 0.0f64..4.0,
        ) {
            let d = d2.sqrt();
            let c = contract(d, DeltaBound::from_value(e)).value();
            prop_assert!(c <= d2.min(e) * (1.0 + 1e-12));
            prop_assert!(c >= 1.0);
            prop_assert!(contract((d2 + dd).sqrt(), DeltaBound::from_value(e)).value() >= c * (1.0 - 1e-12));
            prop_assert!(contract(d, DeltaBound::from_value(e + de)).value() >= c * (1.0 - 1e-12));
            prop_assert!(contract(d, DeltaBound::INFINITY).value() >= c * (1.0 - 1e-12));
        }

        #[test]
        fn interval_endpoints_are_attained(m in 0.01f64..0.99, delta in 1.0f64..5.0) {
            let db = DeltaBound::from_value(delta);
            let (lo, hi) = interval_from_bound(m, db);
            prop_assert!(lo <= m && m <= hi);
            // two-state witnesses: [lo, 1-lo] and [hi, 1-hi] vs [m, 1-m]
            for p in [lo, hi] {
                let d = dynamic_range(&[p, 1.0 - p], &[m, 1.0 - m]).unwrap();
                prop_assert!((d - delta).abs() <= 1e-9 * delta);
            }
        }
    }
}
