//! Generalized loops and the loop series `Z = Z_BP * (1 + sum_C r_C)`.
//!
//! A generalized loop is a nonempty edge subset in which every touched node
//! has degree at least two. Its weight is `r_C = prod_a mu_{a; a_C}` where
//! `a_C` is the set of loop edges at `a`.

use std::cmp::Ordering;

use crate::bp::{central_moment_ratio, BpResult, MEAN_CLAMP};
use crate::error::{Error, Result};
use crate::forney::{two_core, ForneyGraph, TwoCore};

/// The 2-core of a graph together with the vertex terms of a BP fixed point.
///
/// `mu[a][mask]` is the vertex term of core node `a` over the core slots in
/// `mask`; empty masks have weight 1 and single slots weight 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreModel {
    pub core: TwoCore,
    pub mu: Vec<[f64; 8]>,
    pub log_z_bp: f64,
    pub bp_converged: bool,
    /// Core edges whose BP mean hit the clamp.
    pub degenerate_edges: Vec<usize>,
}

impl CoreModel {
    /// Builds the model from BP run on the full graph `graph`.
    pub fn new(graph: &ForneyGraph, bp: &BpResult) -> Result<Self> {
        if bp.edge_means.len() != graph.n_edges() || bp.node_beliefs.len() != graph.n_nodes() {
            return Err(Error::InvalidStructure("BP result does not belong to this graph".into()));
        }
        let core = two_core(graph)?;
        let g = &core.graph;
        let mut mu = Vec::with_capacity(g.n_nodes());
        for a in 0..g.n_nodes() {
            let full = core.node_origin[a];
            let slots: Vec<(usize, f64)> = g
                .node(a)
                .edges
                .iter()
                .map(|&e| {
                    let fe = core.edge_origin[e];
                    (graph.slot_of(full, fe).expect("core edge incident in input"), bp.edge_means[fe])
                })
                .collect();
            let mut row = [0.0; 8];
            for (mask, value) in row.iter_mut().enumerate().take(1 << slots.len()) {
                *value = match mask.count_ones() {
                    0 => 1.0,
                    1 => 0.0,
                    _ => {
                        let chosen: Vec<(usize, f64)> =
                            (0..slots.len()).filter(|s| mask >> s & 1 == 1).map(|s| slots[s]).collect();
                        central_moment_ratio(&bp.node_beliefs[full], &chosen)
                    }
                };
            }
            mu.push(row);
        }
        let degenerate_edges =
            (0..g.n_edges()).filter(|&e| bp.edge_means[core.edge_origin[e]].abs() >= MEAN_CLAMP).collect();
        Ok(CoreModel { core, mu, log_z_bp: bp.bethe_log_z, bp_converged: bp.converged, degenerate_edges })
    }

    pub fn graph(&self) -> &ForneyGraph {
        &self.core.graph
    }

    /// `mu_{a;{x,y}}` for two slots of core node `a`.
    pub fn pair_mu(&self, a: usize, x: usize, y: usize) -> f64 {
        self.mu[a][1 << x | 1 << y]
    }

    /// `mu_{a;a}` over all three slots of a core triplet.
    pub fn triple_mu(&self, a: usize) -> f64 {
        self.mu[a][7]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneralizedLoop {
    /// Core edge indices, ascending.
    pub edges: Vec<usize>,
    /// `(core node, degree in the loop)` for every touched node, ascending.
    pub degrees: Vec<(usize, usize)>,
}

impl GeneralizedLoop {
    /// Validates an edge subset of `graph`.
    pub fn from_edges(graph: &ForneyGraph, edges: &[usize]) -> Result<Self> {
        let mut edges = edges.to_vec();
        edges.sort_unstable();
        edges.dedup();
        if edges.is_empty() {
            return Err(Error::InvalidStructure("a loop has at least one edge".into()));
        }
        let mut deg = vec![0usize; graph.n_nodes()];
        for &e in &edges {
            if e >= graph.n_edges() {
                return Err(Error::InvalidStructure(format!("edge index {e} out of range")));
            }
            for end in graph.edge(e).ends {
                deg[end.node] += 1;
            }
        }
        if let Some(a) = (0..deg.len()).find(|&a| deg[a] == 1) {
            return Err(Error::InvalidStructure(format!("node {} has loop degree 1", graph.node(a).id)));
        }
        let degrees = (0..deg.len()).filter(|&a| deg[a] > 0).map(|a| (a, deg[a])).collect();
        Ok(GeneralizedLoop { edges, degrees })
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn is_two_regular(&self) -> bool {
        self.degrees.iter().all(|&(_, d)| d == 2)
    }

    /// Nodes with loop degree 3, ascending.
    pub fn triplets(&self) -> Vec<usize> {
        self.degrees.iter().filter(|&&(_, d)| d == 3).map(|&(a, _)| a).collect()
    }

    /// Slot mask of the loop edges at `node` in `graph`.
    pub fn mask_at(&self, graph: &ForneyGraph, node: usize) -> usize {
        graph
            .node(node)
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| self.edges.binary_search(e).is_ok())
            .fold(0, |m, (s, _)| m | 1 << s)
    }

    /// Order by size, then lexicographically by edge ids.
    pub fn canonical_cmp(&self, other: &Self, graph: &ForneyGraph) -> Ordering {
        let ids = |l: &Self| {
            let mut v: Vec<usize> = l.edges.iter().map(|&e| graph.edge(e).id).collect();
            v.sort_unstable();
            v
        };
        self.len().cmp(&other.len()).then_with(|| ids(self).cmp(&ids(other)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopTerm {
    pub lp: GeneralizedLoop,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoopLimits {
    /// Largest core edge count accepted by [`enumerate_generalized_loops`].
    pub max_edges: usize,
    /// Abort once this many loops have been produced.
    pub max_loops: Option<u64>,
}

impl Default for LoopLimits {
    fn default() -> Self {
        LoopLimits { max_edges: 20, max_loops: None }
    }
}

/// A loop as seen by the [`visit_loops`] callback.
pub struct LoopView<'a> {
    /// Included edges in search order.
    pub edges: &'a [usize],
    /// Loop slot mask per node.
    pub masks: &'a [u8],
    /// Product of the supplied vertex weights.
    pub weight: f64,
}

impl LoopView<'_> {
    pub fn is_two_regular(&self) -> bool {
        self.masks.iter().all(|m| matches!(m.count_ones(), 0 | 2))
    }

    pub fn triplets(&self) -> Vec<usize> {
        (0..self.masks.len()).filter(|&a| self.masks[a] == 7).collect()
    }
}

/// Calls `visit` once per generalized loop of `graph`.
///
/// `weights[a][mask]` is multiplied in when node `a` is closed with loop
/// slots `mask` (pass ones for an unweighted walk). Returns the loop count.
/// The walk is a pruned backtracking search, so nodes outside the 2-core are
/// harmless; its cost grows with the number of loops, not with `2^|E|`.
pub fn visit_loops<F>(graph: &ForneyGraph, weights: &[[f64; 8]], max_loops: Option<u64>, mut visit: F) -> Result<u64>
where
    F: FnMut(&LoopView<'_>),
{
    if weights.len() != graph.n_nodes() {
        return Err(Error::InvalidParams("one weight row per node is required".into()));
    }
    let mut walk = Walk {
        graph,
        weights,
        order: search_order(graph),
        remaining: graph.nodes().iter().map(|n| n.degree()).collect(),
        masks: vec![0; graph.n_nodes()],
        chosen: Vec::new(),
        count: 0,
        limit: max_loops.unwrap_or(u64::MAX),
    };
    walk.descend(0, 1.0, &mut visit)?;
    Ok(walk.count)
}

fn search_order(graph: &ForneyGraph) -> Vec<usize> {
    let mut seen_node = vec![false; graph.n_nodes()];
    let mut seen_edge = vec![false; graph.n_edges()];
    let mut order = Vec::with_capacity(graph.n_edges());
    for start in 0..graph.n_nodes() {
        if seen_node[start] {
            continue;
        }
        seen_node[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
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

struct Walk<'a> {
    graph: &'a ForneyGraph,
    weights: &'a [[f64; 8]],
    order: Vec<usize>,
    remaining: Vec<usize>,
    masks: Vec<u8>,
    chosen: Vec<usize>,
    count: u64,
    limit: u64,
}

impl Walk<'_> {
    fn descend<F: FnMut(&LoopView<'_>)>(&mut self, depth: usize, weight: f64, visit: &mut F) -> Result<()> {
        if depth == self.order.len() {
            if !self.chosen.is_empty() {
                self.count += 1;
                if self.count > self.limit {
                    return Err(Error::TooLarge(format!("more than {} generalized loops", self.limit)));
                }
                visit(&LoopView { edges: &self.chosen, masks: &self.masks, weight });
            }
            return Ok(());
        }
        let e = self.order[depth];
        let ends = self.graph.edge(e).ends;
        for take in [false, true] {
            let mut w = weight;
            let mut ok = true;
            for end in ends {
                self.remaining[end.node] -= 1;
                if take {
                    self.masks[end.node] |= 1 << end.slot;
                }
            }
            for (i, end) in ends.iter().enumerate() {
                // a self-consistent graph never repeats a node on one edge,
                // but close each node once regardless
                if i == 1 && ends[0].node == end.node {
                    continue;
                }
                if self.remaining[end.node] == 0 {
                    let m = self.masks[end.node];
                    match m.count_ones() {
                        0 => {}
                        1 => ok = false,
                        _ => w *= self.weights[end.node][m as usize],
                    }
                }
            }
            if ok {
                if take {
                    self.chosen.push(e);
                }
                let r = self.descend(depth + 1, w, visit);
                if take {
                    self.chosen.pop();
                }
                r.inspect_err(|_| self.undo(ends, take))?;
            }
            self.undo(ends, take);
        }
        Ok(())
    }

    fn undo(&mut self, ends: [crate::forney::EdgeEnd; 2], take: bool) {
        for end in ends {
            self.remaining[end.node] += 1;
            if take {
                self.masks[end.node] &= !(1 << end.slot);
            }
        }
    }
}

/// All generalized loops of a 2-core in canonical order.
pub fn enumerate_generalized_loops(core: &ForneyGraph, limits: &LoopLimits) -> Result<Vec<GeneralizedLoop>> {
    if core.n_edges() > limits.max_edges {
        return Err(Error::TooLarge(format!(
            "{} edges exceed the loop enumeration cap of {}",
            core.n_edges(),
            limits.max_edges
        )));
    }
    let ones = vec![[1.0; 8]; core.n_nodes()];
    let mut loops = Vec::new();
    visit_loops(core, &ones, limits.max_loops, |v| {
        let mut edges = v.edges.to_vec();
        edges.sort_unstable();
        let degrees = (0..v.masks.len())
            .filter(|&a| v.masks[a] != 0)
            .map(|a| (a, v.masks[a].count_ones() as usize))
            .collect();
        loops.push(GeneralizedLoop { edges, degrees });
    })?;
    loops.sort_by(|a, b| a.canonical_cmp(b, core));
    Ok(loops)
}

/// `r_C`, the product of vertex terms over the loop.
pub fn loop_weight(model: &CoreModel, lp: &GeneralizedLoop) -> f64 {
    let g = model.graph();
    lp.degrees.iter().map(|&(a, _)| model.mu[a][lp.mask_at(g, a)]).product()
}

pub fn loop_terms(model: &CoreModel, loops: &[GeneralizedLoop]) -> Vec<LoopTerm> {
    loops.iter().map(|lp| LoopTerm { lp: lp.clone(), weight: loop_weight(model, lp) }).collect()
}

/// Sorts by `|r_C|` descending, ties in canonical loop order.
pub fn rank_loop_terms(terms: &mut [LoopTerm], core: &ForneyGraph) {
    terms.sort_by(|a, b| {
        b.weight
            .abs()
            .total_cmp(&a.weight.abs())
            .then_with(|| a.lp.canonical_cmp(&b.lp, core))
    });
}

pub fn two_regular_filter(loops: &[GeneralizedLoop]) -> Vec<GeneralizedLoop> {
    loops.iter().filter(|l| l.is_two_regular()).cloned().collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedSeries {
    pub terms_used: usize,
    /// `1 + sum_{i <= l} r_{C_i}`.
    pub correction: f64,
    /// `log Z_BP + log(correction)`; `None` when the correction is not positive.
    pub log_z: Option<f64>,
}

/// The series restricted to the first `l` terms of `ranked`.
pub fn truncated_loop_series(log_z_bp: f64, ranked: &[LoopTerm], l: usize) -> TruncatedSeries {
    let used = l.min(ranked.len());
    let correction = 1.0 + ranked[..used].iter().map(|t| t.weight).sum::<f64>();
    TruncatedSeries {
        terms_used: used,
        correction,
        log_z: (correction > 0.0).then(|| log_z_bp + correction.ln()),
    }
}

/// Aggregates of a full loop-series walk.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LoopSums {
    pub loops: u64,
    pub two_regular: u64,
    /// `sum_C r_C` over all loops.
    pub total: f64,
    /// `sum_C r_C` over 2-regular loops.
    pub two_regular_total: f64,
    pub min_weight: f64,
}

/// Walks every loop of the model's core and sums the weights.
pub fn loop_series_sums(model: &CoreModel, max_loops: Option<u64>) -> Result<LoopSums> {
    let mut s = LoopSums { min_weight: f64::INFINITY, ..Default::default() };
    visit_loops(model.graph(), &model.mu, max_loops, |v| {
        s.loops += 1;
        s.total += v.weight;
        s.min_weight = s.min_weight.min(v.weight);
        if v.is_two_regular() {
            s.two_regular += 1;
            s.two_regular_total += v.weight;
        }
    })?;
    Ok(s)
}
