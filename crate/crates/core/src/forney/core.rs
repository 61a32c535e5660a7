use super::graph::{EdgeSpec, ForneyGraph, NodeSpec};
use crate::error::Result;

/// What [`two_core`] peeled off, in peeling order (indices into the input graph).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RemovalRecord {
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
    /// Log of the constant factored out while contracting peeled parts.
    pub absorbed_log_weight: f64,
}

/// The 2-core of a Forney graph.
///
/// Peeled leaves are summed into their neighbors' tables, so the core keeps
/// the partition function: `log Z(graph) = log Z(core) + absorbed_log_weight`.
/// Node and edge ids are those of the input graph.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoCore {
    pub graph: ForneyGraph,
    /// Core node index -> input node index.
    pub node_origin: Vec<usize>,
    /// Core edge index -> input edge index.
    pub edge_origin: Vec<usize>,
    pub removal: RemovalRecord,
}

impl TwoCore {
    pub fn is_null(&self) -> bool {
        self.graph.is_empty()
    }

    /// Core node indices of degree 3, ascending.
    pub fn triplets(&self) -> Vec<usize> {
        (0..self.graph.n_nodes()).filter(|&a| self.graph.degree(a) == 3).collect()
    }
}

/// Recursively removes nodes of degree at most one.
pub fn two_core(graph: &ForneyGraph) -> Result<TwoCore> {
    let n = graph.n_nodes();
    let mut tables: Vec<Vec<f64>> = graph.nodes().iter().map(|a| a.table.clone()).collect();
    let mut rot: Vec<Vec<usize>> = graph.nodes().iter().map(|a| a.edges.clone()).collect();
    let mut node_alive = vec![true; n];
    let mut edge_alive = vec![true; graph.n_edges()];
    let mut removal = RemovalRecord::default();

    let mut stack: Vec<usize> = (0..n).rev().filter(|&a| rot[a].len() <= 1).collect();
    while let Some(a) = stack.pop() {
        if !node_alive[a] {
            continue;
        }
        match rot[a].len() {
            0 => {
                removal.absorbed_log_weight += tables[a][0].ln();
            }
            1 => {
                let e = rot[a][0];
                let b = graph.neighbor(a, e);
                let slot = rot[b].iter().position(|&x| x == e).expect("edge listed at both ends");
                let leaf = [tables[a][0], tables[a][1]];
                let mut reduced = sum_out(&tables[b], slot, leaf);
                let scale = reduced.iter().cloned().fold(0.0, f64::max);
                if scale > 0.0 {
                    reduced.iter_mut().for_each(|x| *x /= scale);
                    removal.absorbed_log_weight += scale.ln();
                }
                tables[b] = reduced;
                rot[b].remove(slot);
                edge_alive[e] = false;
                removal.edges.push(e);
                if rot[b].len() <= 1 {
                    stack.push(b);
                }
            }
            _ => continue,
        }
        node_alive[a] = false;
        removal.nodes.push(a);
    }

    let node_origin: Vec<usize> = (0..n).filter(|&a| node_alive[a]).collect();
    let edge_origin: Vec<usize> = (0..graph.n_edges()).filter(|&e| edge_alive[e]).collect();
    let nodes = node_origin
        .iter()
        .map(|&a| NodeSpec {
            id: graph.node(a).id,
            edges: rot[a].iter().map(|&e| graph.edge(e).id).collect(),
            table: tables[a].clone(),
        })
        .collect();
    let edges = edge_origin
        .iter()
        .map(|&e| {
            let ends = graph.edge(e).ends;
            EdgeSpec { id: graph.edge(e).id, ends: [graph.node(ends[0].node).id, graph.node(ends[1].node).id] }
        })
        .collect();
    let core = ForneyGraph::assemble(nodes, edges, false)?;
    Ok(TwoCore { graph: core, node_origin, edge_origin, removal })
}

/// Contracts slot `slot` of `table` against the weights `leaf` (indexed by its spin bit).
fn sum_out(table: &[f64], slot: usize, leaf: [f64; 2]) -> Vec<f64> {
    let size = table.len() / 2;
    let low = (1usize << slot) - 1;
    (0..size)
        .map(|y| {
            let base = (y & low) | ((y & !low) << 1);
            table[base] * leaf[0] + table[base | 1 << slot] * leaf[1]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forney::exact::exact_log_z;
    use crate::forney::ising::{ising_grid_forney, CouplingMode, IsingParams};

    fn ising(j: f64) -> Vec<f64> {
        vec![j.exp(), (-j).exp(), (-j).exp(), j.exp()]
    }

    /// Ring 0..4 plus a pendant path 4 - 5 hanging off node 0 (which gets degree 3).
    fn ring_with_tail() -> ForneyGraph {
        let mut nodes = vec![NodeSpec {
            id: 0,
            edges: vec![3, 0, 4],
            table: (0..8).map(|x| 1.0 + x as f64 * 0.1).collect(),
        }];
        for i in 1..4 {
            nodes.push(NodeSpec { id: i, edges: vec![i - 1, i], table: ising(0.3 * i as f64) });
        }
        nodes.push(NodeSpec { id: 4, edges: vec![4, 5], table: ising(0.7) });
        nodes.push(NodeSpec { id: 5, edges: vec![5], table: vec![0.4, 1.3] });
        let mut edges: Vec<EdgeSpec> = (0..4).map(|i| EdgeSpec { id: i, ends: [i, (i + 1) % 4] }).collect();
        edges.push(EdgeSpec { id: 4, ends: [0, 4] });
        edges.push(EdgeSpec { id: 5, ends: [4, 5] });
        ForneyGraph::build(nodes, edges).unwrap()
    }

    #[test]
    fn sum_out_middle_slot() {
        // table over three slots, value = index
        let t: Vec<f64> = (0..8).map(|x| x as f64).collect();
        // remove slot 1 with weights (2, 3): new index y has bits (b0, b2)
        let r = sum_out(&t, 1, [2.0, 3.0]);
        assert_eq!(r, vec![0.0 * 2.0 + 2.0 * 3.0, 1.0 * 2.0 + 3.0 * 3.0, 4.0 * 2.0 + 6.0 * 3.0, 5.0 * 2.0 + 7.0 * 3.0]);
    }

    #[test]
    fn tree_reduces_to_null() {
        let nodes = vec![
            NodeSpec { id: 0, edges: vec![0, 1, 2], table: (0..8).map(|x| 0.5 + x as f64).collect() },
            NodeSpec { id: 1, edges: vec![0], table: vec![1.0, 2.0] },
            NodeSpec { id: 2, edges: vec![1], table: vec![3.0, 1.0] },
            NodeSpec { id: 3, edges: vec![2, 3], table: ising(0.4) },
            NodeSpec { id: 4, edges: vec![3], table: vec![0.5, 0.5] },
        ];
        let edges = vec![
            EdgeSpec { id: 0, ends: [0, 1] },
            EdgeSpec { id: 1, ends: [0, 2] },
            EdgeSpec { id: 2, ends: [0, 3] },
            EdgeSpec { id: 3, ends: [3, 4] },
        ];
        let g = ForneyGraph::build(nodes, edges).unwrap();
        let core = two_core(&g).unwrap();
        assert!(core.is_null());
        assert_eq!(core.removal.nodes.len(), 5);
        assert_eq!(core.removal.edges.len(), 4);
        assert!((core.removal.absorbed_log_weight - exact_log_z(&g).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn cycle_is_its_own_core() {
        let nodes = (0..5).map(|i| NodeSpec { id: i, edges: vec![(i + 4) % 5, i], table: ising(0.2) }).collect();
        let edges = (0..5).map(|i| EdgeSpec { id: i, ends: [i, (i + 1) % 5] }).collect();
        let g = ForneyGraph::build(nodes, edges).unwrap();
        let core = two_core(&g).unwrap();
        assert_eq!(core.graph, g);
        assert!(core.removal.nodes.is_empty());
        assert_eq!(core.removal.absorbed_log_weight, 0.0);
    }

    #[test]
    fn pendant_path_is_peeled_and_z_preserved() {
        let g = ring_with_tail();
        let core = two_core(&g).unwrap();
        assert_eq!(core.graph.n_nodes(), 4);
        assert_eq!(core.graph.n_edges(), 4);
        assert_eq!(core.removal.nodes, vec![5, 4]);
        assert_eq!(core.removal.edges, vec![5, 4]);
        assert!(core.graph.nodes().iter().all(|n| n.degree() == 2));
        assert_eq!(core.node_origin, vec![0, 1, 2, 3]);
        let lhs = exact_log_z(&g).unwrap();
        let rhs = exact_log_z(&core.graph).unwrap() + core.removal.absorbed_log_weight;
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn idempotent_on_grids() {
        for seed in 0..5 {
            let g = ising_grid_forney(IsingParams {
                rows: 3,
                cols: 4,
                beta: 0.8,
                theta: 0.3,
                mode: CouplingMode::Mixed,
                seed,
            })
            .unwrap();
            let core = two_core(&g).unwrap();
            assert!(core.graph.nodes().iter().all(|n| (2..=3).contains(&n.degree())));
            let again = two_core(&core.graph).unwrap();
            assert_eq!(again.graph, core.graph);
            assert!(again.removal.nodes.is_empty());
            // field leaves are the only peeled nodes
            assert_eq!(core.removal.nodes.len(), 12);
            let lhs = exact_log_z(&g).unwrap();
            let rhs = exact_log_z(&core.graph).unwrap() + core.removal.absorbed_log_weight;
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }
}
