//! Sum-product belief propagation on Forney graphs.
//!
//! A message travels along an edge from one interaction to the other and is
//! a normalized distribution over the edge spin, stored as `[p(-1), p(+1)]`.
//! Updates are computed in log space from the factor tables; damping mixes
//! the new and old message in probability space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forney::exact::LogSumExp;
use crate::forney::{spin, ForneyGraph};

/// Edge means are clamped to this magnitude inside the loop-term denominator.
pub const MEAN_CLAMP: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// Gauss-Seidel sweep over edges in index order, both directions.
    Sequential,
    /// Jacobi update of every message from the previous iterate.
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BpConfig {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iters: usize,
    pub schedule: Schedule,
}

impl Default for BpConfig {
    fn default() -> Self {
        BpConfig { damping: 0.5, tolerance: 1e-12, max_iters: 10_000, schedule: Schedule::Sequential }
    }
}

impl BpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidParams(format!("damping {} outside [0, 1)", self.damping)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParams(format!("tolerance {} must be positive", self.tolerance)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParams("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpResult {
    /// `messages[e][side]`: message sent by `edge(e).ends[side].node` along `e`.
    pub messages: Vec<[[f64; 2]; 2]>,
    /// Node beliefs over the node's table index.
    pub node_beliefs: Vec<Vec<f64>>,
    pub edge_beliefs: Vec<[f64; 2]>,
    /// `m_e = b_e(+1) - b_e(-1)`.
    pub edge_means: Vec<f64>,
    pub converged: bool,
    /// Number of sweeps performed.
    pub iterations: usize,
    /// Largest message change in the last sweep.
    pub residual: f64,
    pub bethe_log_z: f64,
}

impl BpResult {
    /// Edges whose mean is at or beyond [`MEAN_CLAMP`] in magnitude.
    pub fn degenerate_edges(&self) -> Vec<usize> {
        (0..self.edge_means.len()).filter(|&e| self.edge_means[e].abs() >= MEAN_CLAMP).collect()
    }
}

struct Tables {
    log: Vec<Vec<f64>>,
}

impl Tables {
    fn new(graph: &ForneyGraph) -> Self {
        Tables { log: graph.nodes().iter().map(|n| n.table.iter().map(|t| t.ln()).collect()).collect() }
    }
}

/// Message into `node` along its slot `slot`.
#[inline]
fn incoming(graph: &ForneyGraph, messages: &[[[f64; 2]; 2]], node: usize, slot: usize) -> [f64; 2] {
    let e = graph.node(node).edges[slot];
    let ends = graph.edge(e).ends;
    let from_side = if ends[0].node == node { 1 } else { 0 };
    messages[e][from_side]
}

fn compute_message(
    graph: &ForneyGraph,
    tables: &Tables,
    messages: &[[[f64; 2]; 2]],
    node: usize,
    out_slot: usize,
) -> Result<[f64; 2]> {
    let deg = graph.degree(node);
    let mut log_in = [[0.0f64; 2]; 3];
    for (t, slot_in) in log_in.iter_mut().enumerate().take(deg) {
        if t != out_slot {
            let m = incoming(graph, messages, node, t);
            *slot_in = [m[0].ln(), m[1].ln()];
        }
    }
    let mut acc = [LogSumExp::default(); 2];
    for (x, &lt) in tables.log[node].iter().enumerate() {
        if lt == f64::NEG_INFINITY {
            continue;
        }
        let mut v = lt;
        for (t, li) in log_in.iter().enumerate().take(deg) {
            if t != out_slot {
                v += li[x >> t & 1];
            }
        }
        acc[x >> out_slot & 1].add(v);
    }
    normalize_log(
        acc[0].value().unwrap_or(f64::NEG_INFINITY),
        acc[1].value().unwrap_or(f64::NEG_INFINITY),
    )
    .ok_or_else(|| Error::NumericalUnderflow(format!("message from node {}", graph.node(node).id)))
}

fn normalize_log(l0: f64, l1: f64) -> Option<[f64; 2]> {
    let max = l0.max(l1);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return None;
    }
    let (a, b) = ((l0 - max).exp(), (l1 - max).exp());
    let s = a + b;
    Some([a / s, b / s])
}

fn damp(new: [f64; 2], old: [f64; 2], damping: f64) -> [f64; 2] {
    if damping == 0.0 {
        return new;
    }
    let a = (1.0 - damping) * new[0] + damping * old[0];
    let b = (1.0 - damping) * new[1] + damping * old[1];
    [a / (a + b), b / (a + b)]
}

fn change(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
}

/// Runs belief propagation from uniform messages.
///
/// Returns the last iterate even without convergence (`converged == false`).
pub fn run_bp(graph: &ForneyGraph, config: &BpConfig) -> Result<BpResult> {
    config.validate()?;
    let tables = Tables::new(graph);
    let mut messages = vec![[[0.5; 2]; 2]; graph.n_edges()];
    let mut converged = graph.n_edges() == 0;
    let mut iterations = 0;
    let mut residual = 0.0;
    while !converged && iterations < config.max_iters {
        iterations += 1;
        residual = match config.schedule {
            Schedule::Sequential => sequential_sweep(graph, &tables, &mut messages, config.damping)?,
            Schedule::Parallel => parallel_sweep(graph, &tables, &mut messages, config.damping)?,
        };
        converged = residual < config.tolerance;
    }
    finish(graph, &tables, messages, converged, iterations, residual)
}

fn sequential_sweep(graph: &ForneyGraph, tables: &Tables, messages: &mut [[[f64; 2]; 2]], damping: f64) -> Result<f64> {
    let mut residual: f64 = 0.0;
    for e in 0..graph.n_edges() {
        for side in 0..2 {
            let end = graph.edge(e).ends[side];
            let fresh = compute_message(graph, tables, messages, end.node, end.slot)?;
            let new = damp(fresh, messages[e][side], damping);
            residual = residual.max(change(new, messages[e][side]));
            messages[e][side] = new;
        }
    }
    Ok(residual)
}

fn parallel_sweep(graph: &ForneyGraph, tables: &Tables, messages: &mut [[[f64; 2]; 2]], damping: f64) -> Result<f64> {
    let old = messages.to_vec();
    let mut residual: f64 = 0.0;
    for e in 0..graph.n_edges() {
        for side in 0..2 {
            let end = graph.edge(e).ends[side];
            let fresh = compute_message(graph, tables, &old, end.node, end.slot)?;
            let new = damp(fresh, old[e][side], damping);
            residual = residual.max(change(new, old[e][side]));
            messages[e][side] = new;
        }
    }
    Ok(residual)
}

fn finish(
    graph: &ForneyGraph,
    tables: &Tables,
    messages: Vec<[[f64; 2]; 2]>,
    converged: bool,
    iterations: usize,
    residual: f64,
) -> Result<BpResult> {
    let mut node_beliefs = Vec::with_capacity(graph.n_nodes());
    for a in 0..graph.n_nodes() {
        let deg = graph.degree(a);
        let log_in: Vec<[f64; 2]> = (0..deg)
            .map(|t| {
                let m = incoming(graph, &messages, a, t);
                [m[0].ln(), m[1].ln()]
            })
            .collect();
        let logs: Vec<f64> = tables.log[a]
            .iter()
            .enumerate()
            .map(|(x, &lt)| lt + log_in.iter().enumerate().map(|(t, l)| l[x >> t & 1]).sum::<f64>())
            .collect();
        let mut lse = LogSumExp::default();
        logs.iter().for_each(|&l| lse.add(l));
        let z = lse
            .value()
            .ok_or_else(|| Error::NumericalUnderflow(format!("belief of node {}", graph.node(a).id)))?;
        node_beliefs.push(logs.iter().map(|l| (l - z).exp()).collect());
    }
    let mut edge_beliefs = Vec::with_capacity(graph.n_edges());
    let mut edge_means = Vec::with_capacity(graph.n_edges());
    for (e, m) in messages.iter().enumerate() {
        let b = normalize_log(m[0][0].ln() + m[1][0].ln(), m[0][1].ln() + m[1][1].ln())
            .ok_or_else(|| Error::NumericalUnderflow(format!("belief of edge {}", graph.edge(e).id)))?;
        edge_beliefs.push(b);
        edge_means.push(b[1] - b[0]);
    }
    let mut result = BpResult {
        messages,
        node_beliefs,
        edge_beliefs,
        edge_means,
        converged,
        iterations,
        residual,
        bethe_log_z: 0.0,
    };
    result.bethe_log_z = bethe_log_z(&result, graph)?;
    Ok(result)
}

/// `-F_Bethe` from the beliefs: node terms `sum b ln(b / f)` minus one
/// entropy term per edge, with `0 ln 0 = 0`.
pub fn bethe_log_z(result: &BpResult, graph: &ForneyGraph) -> Result<f64> {
    let mut free_energy = 0.0;
    for (a, beliefs) in result.node_beliefs.iter().enumerate() {
        let table = &graph.node(a).table;
        for (&b, &f) in beliefs.iter().zip(table) {
            if b > 0.0 {
                if f == 0.0 {
                    return Err(Error::DomainError { node: graph.node(a).id });
                }
                free_energy += b * (b.ln() - f.ln());
            }
        }
    }
    for b in &result.edge_beliefs {
        for &p in b {
            if p > 0.0 {
                free_energy -= p * p.ln();
            }
        }
    }
    Ok(-free_energy)
}

/// Largest change of any message under one undamped sequential sweep
/// started from `result.messages`.
pub fn fixed_point_residual(graph: &ForneyGraph, result: &BpResult) -> Result<f64> {
    let tables = Tables::new(graph);
    let mut messages = result.messages.clone();
    sequential_sweep(graph, &tables, &mut messages, 0.0)
}

/// Marginal of the node belief of `node` on the edge at `slot`.
pub fn node_marginal(result: &BpResult, node: usize, slot: usize) -> [f64; 2] {
    let mut out = [0.0; 2];
    for (x, b) in result.node_beliefs[node].iter().enumerate() {
        out[x >> slot & 1] += b;
    }
    out
}

/// The loop-calculus vertex term
/// `mu = E_{b_a}[prod_{e in S} (s_e - m_e)] / prod_{e in S} sqrt(1 - m_e^2)`
/// for a set `S` of edges incident to `node`.
pub fn loop_vertex_term(result: &BpResult, graph: &ForneyGraph, node: usize, edges: &[usize]) -> Result<f64> {
    let mut slots = Vec::with_capacity(edges.len());
    for &e in edges {
        let slot = graph.slot_of(node, e).ok_or_else(|| {
            Error::InvalidStructure(format!("edge {} is not incident to node {}", graph.edge(e).id, graph.node(node).id))
        })?;
        slots.push((slot, result.edge_means[e]));
    }
    Ok(central_moment_ratio(&result.node_beliefs[node], &slots))
}

/// Normalized central moment of a node belief over `(slot, mean)` pairs.
pub(crate) fn central_moment_ratio(belief: &[f64], slots: &[(usize, f64)]) -> f64 {
    let num: f64 = belief
        .iter()
        .enumerate()
        .map(|(x, &b)| b * slots.iter().map(|&(s, m)| spin(x, s) - m).product::<f64>())
        .sum();
    let den: f64 = slots
        .iter()
        .map(|&(_, m)| {
            let m = m.clamp(-MEAN_CLAMP, MEAN_CLAMP);
            (1.0 - m * m).sqrt()
        })
        .product();
    num / den
}
