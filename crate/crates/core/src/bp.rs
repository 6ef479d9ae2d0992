//! Synchronous sum-product belief propagation.
//!
//! Messages live on directed edges: for edge `e = (u, v)` slot `2e` carries
//! `u -> v` and slot `2e + 1` carries `v -> u`. Every message is a strictly
//! positive vector over the receiver's states, normalized to sum to one.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Model, PotentialTable};
use crate::par;

/// Below this many directed edges a sweep runs sequentially.
const PAR_MIN_MESSAGES: usize = 512;

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    for x in &mut v {
        *x /= s;
    }
    v
}

fn uniform(k: usize) -> Vec<f64> {
    vec![1.0 / k as f64; k]
}

/// Slot of the directed message `from -> to`, if the nodes are adjacent.
pub fn directed_slot(model: &Model, from: usize, to: usize) -> Option<usize> {
    let e = model.edge_between(from, to)?;
    Some(if model.edges()[e].0 == from { 2 * e } else { 2 * e + 1 })
}

/// One normalized message per directed edge.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageSet {
    messages: Vec<Vec<f64>>,
}

impl MessageSet {
    pub fn uniform(model: &Model) -> Self {
        let messages = model
            .edges()
            .iter()
            .flat_map(|&(u, v)| [uniform(model.cardinality(v)), uniform(model.cardinality(u))])
            .collect();
        Self { messages }
    }

    /// Random strictly positive messages, for testing initialization independence.
    pub fn random<R: Rng + ?Sized>(model: &Model, rng: &mut R) -> Self {
        let mut draw = |k: usize| normalize((0..k).map(|_| 0.05 + rng.gen::<f64>()).collect());
        let messages = model
            .edges()
            .iter()
            .flat_map(|&(u, v)| {
                let a = draw(model.cardinality(v));
                let b = draw(model.cardinality(u));
                [a, b]
            })
            .collect();
        Self { messages }
    }

    /// Wraps raw per-slot vectors, checking lengths and positivity and
    /// normalizing each.
    pub fn from_slots(model: &Model, slots: Vec<Vec<f64>>) -> Result<Self> {
        if slots.len() != 2 * model.edge_count() {
            return Err(Error::LengthMismatch { left: slots.len(), right: 2 * model.edge_count() });
        }
        let mut messages = Vec::with_capacity(slots.len());
        for (slot, m) in slots.into_iter().enumerate() {
            let (u, v) = model.edges()[slot / 2];
            let to = if slot % 2 == 0 { v } else { u };
            if m.len() != model.cardinality(to) {
                return Err(Error::LengthMismatch { left: m.len(), right: model.cardinality(to) });
            }
            if let Some(&x) = m.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
                return Err(Error::NonPositive(x));
            }
            messages.push(normalize(m));
        }
        Ok(Self { messages })
    }

    pub fn slot(&self, slot: usize) -> &[f64] {
        &self.messages[slot]
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Message `from -> to`.
    pub fn get(&self, model: &Model, from: usize, to: usize) -> Option<&[f64]> {
        directed_slot(model, from, to).map(|s| self.messages[s].as_slice())
    }
}

/// Per-node normalized beliefs.
pub type BeliefSet = Vec<Vec<f64>>;

#[inline]
fn incoming_slot(model: &Model, nb_edge: usize, to: usize) -> usize {
    // message arriving at `to` along `nb_edge`
    if model.edges()[nb_edge].1 == to {
        2 * nb_edge
    } else {
        2 * nb_edge + 1
    }
}

fn product_into(model: &Model, messages: &MessageSet, t: usize, skip: Option<usize>) -> Vec<f64> {
    let k = model.cardinality(t);
    let mut out = vec![1.0; k];
    for nb in model.neighbors(t) {
        if Some(nb.node) == skip {
            continue;
        }
        let m = messages.slot(incoming_slot(model, nb.edge, t));
        for (o, x) in out.iter_mut().zip(m) {
            *o *= x;
        }
    }
    out
}

/// Normalized product of messages into `t` from every neighbor except `s`.
pub fn partial_product(model: &Model, messages: &MessageSet, t: usize, s: usize) -> Result<Vec<f64>> {
    model.edge_between(t, s).ok_or(Error::NotAnEdge { from: t, to: s })?;
    Ok(normalize(product_into(model, messages, t, Some(s))))
}

/// `out(x_s) = sum_{x_t} psi(x_t, x_s) partial(x_t)`, normalized, where rows of
/// `table` index the sender.
pub fn propagate(table: &PotentialTable, partial: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; table.cols()];
    for (i, &w) in partial.iter().enumerate() {
        for (o, &p) in out.iter_mut().zip(table.row(i)) {
            *o += p * w;
        }
    }
    normalize(out)
}

fn update_unchecked(model: &Model, messages: &MessageSet, t: usize, s: usize, edge: usize) -> Vec<f64> {
    let partial = product_into(model, messages, t, Some(s));
    let mut out = vec![0.0; model.cardinality(s)];
    for (xt, &w) in partial.iter().enumerate() {
        for (xs, o) in out.iter_mut().enumerate() {
            *o += model.potential(edge, t, xt, xs) * w;
        }
    }
    // partial products can drift toward the subnormal range on long chains
    let peak = out.iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        for o in &mut out {
            *o /= peak;
        }
    }
    normalize(out)
}

/// The new message `t -> s` computed from the current messages.
pub fn update_message(model: &Model, messages: &MessageSet, t: usize, s: usize) -> Result<Vec<f64>> {
    let edge = model.edge_between(t, s).ok_or(Error::NotAnEdge { from: t, to: s })?;
    Ok(update_unchecked(model, messages, t, s, edge))
}

/// Normalized product of all messages into `t` (or the node's own unary when
/// it has no neighbors).
pub fn belief(model: &Model, messages: &MessageSet, t: usize) -> Vec<f64> {
    if model.degree(t) == 0 {
        return match model.isolated_unary(t) {
            Some(f) => normalize(f.to_vec()),
            None => uniform(model.cardinality(t)),
        };
    }
    normalize(product_into(model, messages, t, None))
}

pub fn beliefs(model: &Model, messages: &MessageSet) -> BeliefSet {
    (0..model.node_count()).map(|t| belief(model, messages, t)).collect()
}

fn check_same_len(f: &[f64], g: &[f64]) -> Result<()> {
    if f.len() == g.len() {
        Ok(())
    } else {
        Err(Error::LengthMismatch { left: f.len(), right: g.len() })
    }
}

/// `ln d(f/g) = (max_a ln(f_a/g_a) - min_b ln(f_b/g_b)) / 2`.
pub fn log_dynamic_range(f: &[f64], g: &[f64]) -> Result<f64> {
    check_same_len(f, g)?;
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for (&a, &b) in f.iter().zip(g) {
        let r = a.ln() - b.ln();
        hi = hi.max(r);
        lo = lo.min(r);
    }
    if f.is_empty() {
        return Ok(0.0);
    }
    Ok(0.5 * (hi - lo))
}

/// Dynamic range `d(f/g) = max_{a,b} sqrt((f_a/g_a) / (f_b/g_b))`.
pub fn dynamic_range(f: &[f64], g: &[f64]) -> Result<f64> {
    log_dynamic_range(f, g).map(f64::exp)
}

#[derive(Debug, Clone, Default)]
pub enum BpInit {
    #[default]
    Uniform,
    Given(MessageSet),
}

#[derive(Debug, Clone)]
pub struct BpOptions {
    pub max_iters: usize,
    pub tolerance: f64,
    pub init: BpInit,
}

impl Default for BpOptions {
    fn default() -> Self {
        Self { max_iters: crate::DEFAULT_MAX_ITERS, tolerance: crate::DEFAULT_TOLERANCE, init: BpInit::Uniform }
    }
}

#[derive(Debug, Clone)]
pub struct BpReport {
    pub messages: MessageSet,
    pub beliefs: BeliefSet,
    pub iterations: usize,
    pub converged: bool,
    /// Largest log dynamic range of any message change in the last sweep.
    pub residual: f64,
}

/// Runs synchronous sweeps until the largest log dynamic range of a message
/// change is within `tolerance`, or `max_iters` sweeps have run.
pub fn run_bp(model: &Model, opts: &BpOptions) -> BpReport {
    let mut messages = match &opts.init {
        BpInit::Uniform => MessageSet::uniform(model),
        BpInit::Given(m) => m.clone(),
    };
    assert_eq!(messages.len(), 2 * model.edge_count(), "message set does not match the model");
    let max_iters = opts.max_iters.max(1);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        let current = &messages;
        let next: Vec<Vec<f64>> = par::map_indexed_min(current.len(), PAR_MIN_MESSAGES, |slot| {
            let e = slot / 2;
            let (u, v) = model.edges()[e];
            let (t, s) = if slot % 2 == 0 { (u, v) } else { (v, u) };
            update_unchecked(model, current, t, s, e)
        });
        residual = next
            .iter()
            .zip(&current.messages)
            .map(|(a, b)| log_dynamic_range(a, b).expect("same receiver"))
            .fold(0.0, f64::max);
        messages = MessageSet { messages: next };
        iterations += 1;
        if residual <= opts.tolerance {
            converged = true;
            break;
        }
    }
    let beliefs = beliefs(model, &messages);
    BpReport { messages, beliefs, iterations, converged, residual }
}
