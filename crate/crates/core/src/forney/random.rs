//! Random Forney graphs with generic positive tables, for property tests and
//! cross-checks where Ising symmetry would hide mistakes.

use rand::seq::SliceRandom;
use rand::Rng;

use super::geometric::{Factor, GeometricBuilder};
use super::graph::{EdgeSpec, ForneyGraph, NodeSpec};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomPlanarOptions {
    /// Lattice points per row.
    pub width: usize,
    /// Lattice points per column.
    pub height: usize,
    /// Probability of trying to keep each lattice edge (degree is capped at 3).
    pub keep_prob: f64,
    /// Probability that a kept edge is subdivided (once or twice).
    pub subdivide_prob: f64,
    /// Probability that a node of degree < 3 gets a pendant leaf.
    pub leaf_prob: f64,
    /// Table entries are drawn uniformly from this range.
    pub table_range: (f64, f64),
}

impl Default for RandomPlanarOptions {
    fn default() -> Self {
        RandomPlanarOptions {
            width: 3,
            height: 3,
            keep_prob: 0.8,
            subdivide_prob: 0.3,
            leaf_prob: 0.2,
            table_range: (0.2, 2.0),
        }
    }
}

fn random_table<R: Rng + ?Sized>(rng: &mut R, degree: usize, range: (f64, f64)) -> Vec<f64> {
    (0..1usize << degree).map(|_| rng.random_range(range.0..range.1)).collect()
}

/// Random subgraph of a lattice with maximum degree 3, optionally subdivided
/// and decorated with leaves; rotation from the straight-line drawing.
pub fn random_planar_forney<R: Rng + ?Sized>(rng: &mut R, opts: &RandomPlanarOptions) -> Result<ForneyGraph> {
    const SPACING: f64 = 10.0;
    let (w, h) = (opts.width, opts.height);
    let mut candidates = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w {
                candidates.push((y * w + x, y * w + x + 1));
            }
            if y + 1 < h {
                candidates.push((y * w + x, (y + 1) * w + x));
            }
        }
    }
    candidates.shuffle(rng);
    let mut degree = vec![0usize; w * h];
    let mut kept = Vec::new();
    for (a, b) in candidates {
        if degree[a] < 3 && degree[b] < 3 && rng.random_bool(opts.keep_prob) {
            degree[a] += 1;
            degree[b] += 1;
            kept.push((a, b));
        }
    }
    kept.sort();

    let mut builder = GeometricBuilder::new();
    let mut lattice_node = vec![usize::MAX; w * h];
    for p in 0..w * h {
        if degree[p] > 0 {
            let pos = ((p % w) as f64 * SPACING, (p / w) as f64 * SPACING);
            lattice_node[p] = builder.add_node(pos, Factor::Equality);
        }
    }
    for (a, b) in kept {
        let (na, nb) = (lattice_node[a], lattice_node[b]);
        let splits = if rng.random_bool(opts.subdivide_prob) { rng.random_range(1..=2) } else { 0 };
        let (pa, pb) = (builder.position(na), builder.position(nb));
        let mut prev = na;
        for k in 1..=splits {
            let t = k as f64 / (splits + 1) as f64;
            let mid = builder.add_node((pa.0 + t * (pb.0 - pa.0), pa.1 + t * (pb.1 - pa.1)), Factor::Equality);
            builder.add_edge(prev, mid);
            prev = mid;
        }
        builder.add_edge(prev, nb);
    }
    let n_inner = builder.n_nodes();
    for v in 0..n_inner {
        if builder.degree(v) < 3 && rng.random_bool(opts.leaf_prob) {
            let (x, y) = builder.position(v);
            let leaf = builder.add_node((x + 3.0, y + 2.0), Factor::Equality);
            builder.add_edge(v, leaf);
        }
    }
    for v in 0..builder.n_nodes() {
        let table = random_table(rng, builder.degree(v), opts.table_range);
        builder.set_factor(v, Factor::Table(table));
    }
    builder.build()
}

/// Random tree with `n_nodes` nodes of degree at most 3.
pub fn random_tree_forney<R: Rng + ?Sized>(rng: &mut R, n_nodes: usize, table_range: (f64, f64)) -> Result<ForneyGraph> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_nodes.max(1)];
    let mut edges = Vec::new();
    for v in 1..n_nodes {
        let open: Vec<usize> = (0..v).filter(|&u| adj[u].len() < 3).collect();
        let u = open[rng.random_range(0..open.len())];
        let e = edges.len();
        edges.push(EdgeSpec { id: e, ends: [u, v] });
        adj[u].push(e);
        adj[v].push(e);
    }
    let nodes = adj
        .into_iter()
        .enumerate()
        .map(|(id, edges)| NodeSpec { id, table: random_table(rng, edges.len(), table_range), edges })
        .collect();
    ForneyGraph::build(nodes, edges)
}
