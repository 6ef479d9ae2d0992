//! Seeded model generators.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)` (crate
//! `rand_chacha` 0.3) and uniform doubles drawn with `rand` 0.8's
//! `Rng::gen::<f64>()`, so a seed fixes the output on every platform.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Model, ModelBuilder, PotentialTable};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Coupling strength regimes for grid experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrengthPreset {
    /// `d(psi) <= 1.7`, below the unique-fixed-point threshold.
    Weak,
    /// `d(psi)` up to 1.9, just below it.
    Stronger,
    /// `d(psi)` up to 2.5, well above it.
    VeryStrong,
    Custom(f64),
}

impl StrengthPreset {
    pub fn target_d(self) -> f64 {
        match self {
            StrengthPreset::Weak => 1.7,
            StrengthPreset::Stronger => 1.9,
            StrengthPreset::VeryStrong => 2.5,
            StrengthPreset::Custom(d) => d,
        }
    }
}

impl FromStr for StrengthPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "weak" => Ok(Self::Weak),
            "stronger" => Ok(Self::Stronger),
            "very-strong" | "very_strong" => Ok(Self::VeryStrong),
            _ => match s.parse::<f64>() {
                Ok(d) if d >= 1.0 && d.is_finite() => Ok(Self::Custom(d)),
                _ => Err(format!("unknown strength `{s}` (expected weak, stronger, very-strong or a number >= 1)")),
            },
        }
    }
}

impl fmt::Display for StrengthPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrengthPreset::Weak => f.write_str("weak"),
            StrengthPreset::Stronger => f.write_str("stronger"),
            StrengthPreset::VeryStrong => f.write_str("very-strong"),
            StrengthPreset::Custom(d) => write!(f, "{d}"),
        }
    }
}

/// Symmetric binary coupling `exp(theta * s(a, b))` with `s = +1` on agreement
/// and `-1` otherwise; its strength is exactly `exp(|theta|)`.
pub fn ising_table(theta: f64) -> PotentialTable {
    let (same, diff) = (theta.exp(), (-theta).exp());
    PotentialTable::new(2, 2, vec![same, diff, diff, same]).expect("2x2")
}

/// Edges of a `rows x cols` grid in row-major node order: for each node, its
/// right neighbor then its lower neighbor.
pub fn grid_edges(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let u = r * cols + c;
            if c + 1 < cols {
                edges.push((u, u + 1));
            }
            if r + 1 < rows {
                edges.push((u, u + cols));
            }
        }
    }
    edges
}

/// Binary grid with `theta_uv ~ U[-ln d, ln d]` per edge, so every edge has
/// strength at most `target_d`. Draws happen in edge order, one per edge.
pub fn gen_grid(rows: usize, cols: usize, target_d: f64, seed: u64) -> Model {
    let mut rng = rng_from_seed(seed);
    let span = target_d.max(1.0).ln();
    let edges = grid_edges(rows, cols);
    let tables = edges
        .iter()
        .map(|_| ising_table(span * (2.0 * rng.gen::<f64>() - 1.0)))
        .collect();
    Model::new(vec![2; rows * cols], edges, tables).expect("grid is a valid model")
}

/// A random strictly positive table with strength exactly `target_d`
/// (up to rounding). A 1xk or kx1 table always has strength 1.
pub fn random_table<R: Rng + ?Sized>(rows: usize, cols: usize, target_d: f64, rng: &mut R) -> PotentialTable {
    let target = target_d.max(1.0).ln();
    let (logs, ls) = loop {
        let logs: Vec<f64> = (0..rows * cols).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let raw = PotentialTable::new(rows, cols, logs.iter().map(|x| x.exp()).collect()).expect("shape");
        let ls = raw.log_strength().expect("positive");
        // a nearly rank-1 draw would need an enormous scale; redraw it
        if rows < 2 || cols < 2 || (ls > 0.05 && (target / ls).exp().is_finite()) {
            break (logs, ls);
        }
    };
    let scale = if ls > 0.0 { target / ls } else { 0.0 };
    PotentialTable::new(rows, cols, logs.iter().map(|x| (x * scale).exp()).collect()).expect("shape")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Tree,
    Cycle,
    Clique,
    Grid,
    /// Erdos-Renyi graph with edge probability 1/2.
    Random,
    /// Cycle plus chords and pendant vertices.
    Lollipop,
}

impl Topology {
    pub const ALL: [Topology; 6] =
        [Topology::Tree, Topology::Cycle, Topology::Clique, Topology::Grid, Topology::Random, Topology::Lollipop];
}

/// Edges of a uniformly random labelled tree built by random attachment.
pub fn random_tree_edges<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    (1..n)
        .map(|i| {
            let j = rng.gen_range(0..i);
            let (a, b) = (order[i], order[j]);
            (a.min(b), a.max(b))
        })
        .collect()
}

pub fn topology_edges<R: Rng + ?Sized>(topology: Topology, n: usize, rng: &mut R) -> Vec<(usize, usize)> {
    match topology {
        Topology::Tree => random_tree_edges(n, rng),
        Topology::Cycle => {
            let mut e: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
            if n >= 3 {
                e.push((0, n - 1));
            }
            e
        }
        Topology::Clique => (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect(),
        Topology::Grid => {
            let cols = (n as f64).sqrt().ceil() as usize;
            grid_edges(n.div_ceil(cols), cols).into_iter().filter(|&(_, v)| v < n).collect()
        }
        Topology::Random => (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect::<Vec<_>>()
            .into_iter()
            .filter(|_| rng.gen_bool(0.5))
            .collect(),
        Topology::Lollipop => {
            let ring = (n / 2).max(3).min(n);
            let mut e: Vec<(usize, usize)> =
                (0..ring).map(|i| (i.min((i + 1) % ring), i.max((i + 1) % ring))).collect();
            if ring >= 4 {
                e.push((0, 2));
            }
            for v in ring..n {
                e.push((rng.gen_range(0..v), v));
            }
            e.sort_unstable();
            e.dedup();
            e
        }
    }
}

/// Parameters for [`random_model`].
#[derive(Debug, Clone)]
pub struct RandomModelConfig {
    pub topology: Topology,
    pub nodes: usize,
    pub cardinalities: Vec<usize>,
    pub min_strength: f64,
    pub max_strength: f64,
    pub with_unaries: bool,
}

/// Random model: per-node cardinality drawn from `cardinalities`, per-edge
/// strength drawn uniformly from `[min_strength, max_strength]`, unaries with
/// entries in `[0.5, 2)` when requested.
pub fn random_model<R: Rng + ?Sized>(cfg: &RandomModelConfig, rng: &mut R) -> Model {
    let cards: Vec<usize> = (0..cfg.nodes).map(|_| *cfg.cardinalities.choose(rng).expect("nonempty")).collect();
    let edges = topology_edges(cfg.topology, cfg.nodes, rng);
    let mut b = ModelBuilder::new(cards.clone());
    for &(u, v) in &edges {
        let d = cfg.min_strength + (cfg.max_strength - cfg.min_strength) * rng.gen::<f64>();
        b = b.edge(u, v, random_table(cards[u], cards[v], d, rng));
    }
    if cfg.with_unaries {
        for (v, &k) in cards.iter().enumerate() {
            b = b.unary(v, (0..k).map(|_| 0.5 + 1.5 * rng.gen::<f64>()).collect());
        }
    }
    b.build().expect("generated model is valid")
}
