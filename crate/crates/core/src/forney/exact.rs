//! Exact partition function by exhaustive enumeration of edge spins.
//!
//! The search assigns edges depth-first and cuts a branch as soon as some
//! partially assigned factor has no completion with positive weight, so the
//! work is proportional to the support of the distribution rather than to
//! `2^|E|`. Deterministic factors (equality nodes) therefore cost nothing.

use super::graph::ForneyGraph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactLimits {
    /// Budget on visited partial assignments.
    pub max_search_nodes: u64,
}

impl Default for ExactLimits {
    fn default() -> Self {
        ExactLimits { max_search_nodes: 1 << 26 }
    }
}

/// `log Z` with the default search budget.
pub fn exact_log_z(graph: &ForneyGraph) -> Result<f64> {
    exact_log_z_with(graph, ExactLimits::default())
}

pub fn exact_log_z_with(graph: &ForneyGraph, limits: ExactLimits) -> Result<f64> {
    let mut base = 0.0;
    for n in graph.nodes().iter().filter(|n| n.degree() == 0) {
        if n.table[0] == 0.0 {
            return Err(Error::ZeroPartition);
        }
        base += n.table[0].ln();
    }

    let nodes: Vec<NodeState> = graph
        .nodes()
        .iter()
        .map(|n| NodeState::new(&n.table, n.degree()))
        .collect();
    let mut search = Search {
        graph,
        order: edge_order(graph),
        nodes,
        acc: LogSumExp::default(),
        visited: 0,
        limit: limits.max_search_nodes,
    };
    search.descend(0, 0.0)?;
    match search.acc.value() {
        Some(v) => Ok(base + v),
        None => Err(Error::ZeroPartition),
    }
}

/// Breadth-first edge order so that factors complete early.
fn edge_order(graph: &ForneyGraph) -> Vec<usize> {
    let mut seen_node = vec![false; graph.n_nodes()];
    let mut seen_edge = vec![false; graph.n_edges()];
    let mut order = Vec::with_capacity(graph.n_edges());
    let mut queue = std::collections::VecDeque::new();
    for start in 0..graph.n_nodes() {
        if seen_node[start] {
            continue;
        }
        seen_node[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            for &e in &graph.node(v).edges {
                if !seen_edge[e] {
                    seen_edge[e] = true;
                    order.push(e);
                }
                let w = graph.neighbor(v, e);
                if !seen_node[w] {
                    seen_node[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    order
}

struct NodeState {
    log_table: Vec<f64>,
    // feasible[mask << degree | value]: some completion of the partial
    // assignment (bits in `mask` fixed to `value`) has positive weight
    feasible: Vec<bool>,
    degree: usize,
    mask: usize,
    value: usize,
}

impl NodeState {
    fn new(table: &[f64], degree: usize) -> Self {
        let size = 1usize << degree;
        let mut feasible = vec![false; size * size];
        for mask in 0..size {
            for value in 0..size {
                if value & !mask != 0 {
                    continue;
                }
                feasible[mask << degree | value] = (0..size).any(|x| x & mask == value && table[x] > 0.0);
            }
        }
        NodeState {
            log_table: table.iter().map(|&t| t.ln()).collect(),
            feasible,
            degree,
            mask: 0,
            value: 0,
        }
    }

    fn full(&self) -> bool {
        self.mask == (1 << self.degree) - 1
    }

    fn ok(&self) -> bool {
        self.feasible[self.mask << self.degree | self.value]
    }
}

struct Search<'a> {
    graph: &'a ForneyGraph,
    order: Vec<usize>,
    nodes: Vec<NodeState>,
    acc: LogSumExp,
    visited: u64,
    limit: u64,
}

impl Search<'_> {
    fn descend(&mut self, depth: usize, log_w: f64) -> Result<()> {
        if depth == self.order.len() {
            self.acc.add(log_w);
            return Ok(());
        }
        let e = self.order[depth];
        let ends = self.graph.edge(e).ends;
        for bit in 0..2usize {
            let mut ok = true;
            let mut gained = 0.0;
            for end in ends {
                let n = &mut self.nodes[end.node];
                n.mask |= 1 << end.slot;
                n.value |= bit << end.slot;
                if !n.ok() {
                    ok = false;
                } else if n.full() {
                    gained += n.log_table[n.value];
                }
            }
            if ok {
                self.visited += 1;
                if self.visited > self.limit {
                    return Err(Error::TooLarge(format!(
                        "exact enumeration exceeded {} search nodes",
                        self.limit
                    )));
                }
                self.descend(depth + 1, log_w + gained)?;
            }
            for end in ends {
                let n = &mut self.nodes[end.node];
                n.mask &= !(1 << end.slot);
                n.value &= !(1 << end.slot);
            }
        }
        Ok(())
    }
}

/// Streaming log-sum-exp.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct LogSumExp {
    max: f64,
    sum: f64,
    any: bool,
}

impl LogSumExp {
    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if !self.any {
            self.max = x;
            self.sum = 1.0;
            self.any = true;
        } else if x > self.max {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (x - self.max).exp();
        }
    }

    pub fn value(&self) -> Option<f64> {
        self.any.then(|| self.max + self.sum.ln())
    }
}
