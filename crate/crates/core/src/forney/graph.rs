use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::error::{Error, Result};

/// Largest supported node degree.
pub const MAX_DEGREE: usize = 3;

/// Node description as it appears in the JSON graph format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: usize,
    /// Incident edge ids in rotation order.
    pub edges: Vec<usize>,
    pub table: Vec<f64>,
}

/// Edge description as it appears in the JSON graph format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub id: usize,
    pub ends: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<EdgeSpec>,
}

/// An interaction. `edges` holds edge indices in rotation order; the factor
/// table is indexed by the incident spins with bit `i` (least significant
/// first) giving the spin on `edges[i]`: 0 for -1, 1 for +1.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionNode {
    pub id: usize,
    pub edges: Vec<usize>,
    pub table: Vec<f64>,
}

impl InteractionNode {
    pub fn degree(&self) -> usize {
        self.edges.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeEnd {
    pub node: usize,
    pub slot: usize,
}

/// A binary variable shared by the two interactions at its ends.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableEdge {
    pub id: usize,
    pub ends: [EdgeEnd; 2],
}

impl VariableEdge {
    /// The end that is not at `node`.
    pub fn other(&self, node: usize) -> EdgeEnd {
        if self.ends[0].node == node {
            self.ends[1]
        } else {
            self.ends[0]
        }
    }

    pub fn end_at(&self, node: usize) -> EdgeEnd {
        if self.ends[0].node == node {
            self.ends[0]
        } else {
            self.ends[1]
        }
    }
}

/// Spin value of `slot` in a table index.
#[inline]
pub fn spin(state: usize, slot: usize) -> f64 {
    if state >> slot & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// A binary Forney graph with a planar rotation system.
#[derive(Debug, Clone, PartialEq)]
pub struct ForneyGraph {
    nodes: Vec<InteractionNode>,
    edges: Vec<VariableEdge>,
    node_index: HashMap<usize, usize>,
    edge_index: HashMap<usize, usize>,
}

impl ForneyGraph {
    /// Validates and assembles a graph from id-based specs.
    pub fn build(nodes: Vec<NodeSpec>, edges: Vec<EdgeSpec>) -> Result<Self> {
        Self::assemble(nodes, edges, true)
    }

    /// Assembly without the non-zero table check, for graphs derived from an
    /// already validated one (contracted tables may legitimately vanish).
    pub(crate) fn assemble(nodes: Vec<NodeSpec>, edges: Vec<EdgeSpec>, strict_tables: bool) -> Result<Self> {
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if node_index.insert(n.id, i).is_some() {
                return Err(Error::InvalidStructure(format!("duplicate node id {}", n.id)));
            }
        }
        let mut edge_index = HashMap::with_capacity(edges.len());
        for (i, e) in edges.iter().enumerate() {
            if edge_index.insert(e.id, i).is_some() {
                return Err(Error::InvalidStructure(format!("duplicate edge id {}", e.id)));
            }
        }
        for n in &nodes {
            if n.edges.len() > MAX_DEGREE {
                return Err(Error::DegreeTooHigh { node: n.id, degree: n.edges.len() });
            }
        }

        let mut pairs = HashSet::with_capacity(edges.len());
        for e in &edges {
            let [a, b] = e.ends;
            for end in [a, b] {
                if !node_index.contains_key(&end) {
                    return Err(Error::DanglingEdge { edge: e.id, reason: format!("unknown end node {end}") });
                }
            }
            if a == b {
                return Err(Error::InvalidStructure(format!("edge {} is a self-loop", e.id)));
            }
            if !pairs.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidStructure(format!("edge {} is parallel to another edge", e.id)));
            }
        }

        // slot of each edge at each of its ends
        let mut slots: Vec<[Option<usize>; 2]> = vec![[None, None]; edges.len()];
        let mut out_nodes = Vec::with_capacity(nodes.len());
        for n in nodes {
            let mut idx_edges = Vec::with_capacity(n.edges.len());
            for (slot, eid) in n.edges.iter().enumerate() {
                let &ei = edge_index
                    .get(eid)
                    .ok_or_else(|| Error::InvalidStructure(format!("node {} lists unknown edge {eid}", n.id)))?;
                let ends = edges[ei].ends;
                let side = if ends[0] == n.id {
                    0
                } else if ends[1] == n.id {
                    1
                } else {
                    return Err(Error::InvalidStructure(format!(
                        "node {} lists edge {eid} which does not end there",
                        n.id
                    )));
                };
                if slots[ei][side].replace(slot).is_some() {
                    return Err(Error::InvalidStructure(format!("node {} lists edge {eid} twice", n.id)));
                }
                idx_edges.push(ei);
            }
            check_table(n.id, idx_edges.len(), &n.table, strict_tables)?;
            out_nodes.push(InteractionNode { id: n.id, edges: idx_edges, table: n.table });
        }

        let mut out_edges = Vec::with_capacity(edges.len());
        for (ei, e) in edges.iter().enumerate() {
            let mut ends = [EdgeEnd { node: 0, slot: 0 }; 2];
            for side in 0..2 {
                let slot = slots[ei][side].ok_or_else(|| Error::DanglingEdge {
                    edge: e.id,
                    reason: format!("missing from the rotation of node {}", e.ends[side]),
                })?;
                ends[side] = EdgeEnd { node: node_index[&e.ends[side]], slot };
            }
            out_edges.push(VariableEdge { id: e.id, ends });
        }

        let graph = ForneyGraph { nodes: out_nodes, edges: out_edges, node_index, edge_index };
        graph.embedding().planar_faces()?;
        Ok(graph)
    }

    pub fn from_file(file: GraphFile) -> Result<Self> {
        Self::build(file.nodes, file.edges)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(s)?)
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeSpec {
                    id: n.id,
                    edges: n.edges.iter().map(|&e| self.edges[e].id).collect(),
                    table: n.table.clone(),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeSpec { id: e.id, ends: [self.nodes[e.ends[0].node].id, self.nodes[e.ends[1].node].id] })
                .collect(),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("graph serializes")
    }

    pub fn nodes(&self) -> &[InteractionNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[VariableEdge] {
        &self.edges
    }

    pub fn node(&self, i: usize) -> &InteractionNode {
        &self.nodes[i]
    }

    pub fn edge(&self, i: usize) -> &VariableEdge {
        &self.edges[i]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn degree(&self, node: usize) -> usize {
        self.nodes[node].edges.len()
    }

    pub fn node_by_id(&self, id: usize) -> Option<usize> {
        self.node_index.get(&id).copied()
    }

    pub fn edge_by_id(&self, id: usize) -> Option<usize> {
        self.edge_index.get(&id).copied()
    }

    /// Rotation slot of `edge` at `node`.
    pub fn slot_of(&self, node: usize, edge: usize) -> Option<usize> {
        let e = &self.edges[edge];
        e.ends.iter().find(|end| end.node == node).map(|end| end.slot)
    }

    /// Neighbor node reached from `node` through `edge`.
    pub fn neighbor(&self, node: usize, edge: usize) -> usize {
        self.edges[edge].other(node).node
    }

    pub fn embedding(&self) -> Embedding {
        let edges = self.edges.iter().map(|e| [e.ends[0].node, e.ends[1].node]).collect();
        let rotation = self.nodes.iter().map(|n| n.edges.clone()).collect();
        Embedding::new(self.nodes.len(), edges, rotation).expect("rotation consistent by construction")
    }

    /// Number of connected components (isolated nodes count).
    pub fn n_components(&self) -> usize {
        self.embedding().components().1
    }

    /// Number of faces traced from the rotation system, counting one face for
    /// every isolated node.
    pub fn n_faces(&self) -> usize {
        let emb = self.embedding();
        let isolated = self.nodes.iter().filter(|n| n.edges.is_empty()).count();
        emb.trace_faces().len() + isolated
    }
}

fn check_table(node: usize, degree: usize, table: &[f64], strict: bool) -> Result<()> {
    let expected = 1usize << degree;
    if table.len() != expected {
        return Err(Error::MalformedTable {
            node,
            reason: format!("expected {expected} entries, found {}", table.len()),
        });
    }
    if let Some(x) = table.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::MalformedTable { node, reason: format!("entry {x} is negative or not finite") });
    }
    if strict && table.iter().all(|&x| x == 0.0) {
        return Err(Error::MalformedTable { node, reason: "all entries are zero".into() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(n: usize, table: Vec<f64>) -> ForneyGraph {
        let nodes = (0..n)
            .map(|i| NodeSpec { id: i, edges: vec![(i + n - 1) % n, i], table: table.clone() })
            .collect();
        let edges = (0..n).map(|i| EdgeSpec { id: i, ends: [i, (i + 1) % n] }).collect();
        ForneyGraph::build(nodes, edges).unwrap()
    }

    #[test]
    fn ring_of_three_is_valid() {
        let g = ring(3, vec![1.0; 4]);
        assert_eq!(g.n_components(), 1);
        assert_eq!(g.n_faces(), 2);
        assert_eq!(g.slot_of(0, 2), Some(0));
        assert_eq!(g.slot_of(0, 0), Some(1));
    }

    #[test]
    fn degree_four_is_rejected() {
        let mut nodes = vec![NodeSpec { id: 0, edges: vec![0, 1, 2, 3], table: vec![1.0; 16] }];
        let mut edges = Vec::new();
        for i in 0..4 {
            nodes.push(NodeSpec { id: i + 1, edges: vec![i], table: vec![1.0; 2] });
            edges.push(EdgeSpec { id: i, ends: [0, i + 1] });
        }
        assert!(matches!(ForneyGraph::build(nodes, edges), Err(Error::DegreeTooHigh { node: 0, degree: 4 })));
    }

    #[test]
    fn path_with_leaves_is_valid() {
        let nodes = vec![
            NodeSpec { id: 10, edges: vec![5], table: vec![1.0, 2.0] },
            NodeSpec { id: 11, edges: vec![5], table: vec![3.0, 1.0] },
        ];
        let g = ForneyGraph::build(nodes, vec![EdgeSpec { id: 5, ends: [10, 11] }]).unwrap();
        assert_eq!(g.n_edges(), 1);
        assert_eq!(g.n_faces(), 1);
    }

    #[test]
    fn malformed_tables() {
        let bad_len = vec![NodeSpec { id: 0, edges: vec![], table: vec![1.0, 1.0] }];
        assert!(matches!(ForneyGraph::build(bad_len, vec![]), Err(Error::MalformedTable { .. })));
        let negative = vec![NodeSpec { id: 0, edges: vec![], table: vec![-1.0] }];
        assert!(matches!(ForneyGraph::build(negative, vec![]), Err(Error::MalformedTable { .. })));
        let zero = vec![NodeSpec { id: 0, edges: vec![], table: vec![0.0] }];
        assert!(matches!(ForneyGraph::build(zero, vec![]), Err(Error::MalformedTable { .. })));
    }

    #[test]
    fn dangling_edges() {
        let nodes = vec![NodeSpec { id: 0, edges: vec![0], table: vec![1.0, 1.0] }];
        let r = ForneyGraph::build(nodes.clone(), vec![EdgeSpec { id: 0, ends: [0, 7] }]);
        assert!(matches!(r, Err(Error::DanglingEdge { .. })));
        let nodes2 = vec![nodes[0].clone(), NodeSpec { id: 1, edges: vec![], table: vec![1.0] }];
        let r = ForneyGraph::build(nodes2, vec![EdgeSpec { id: 0, ends: [0, 1] }]);
        assert!(matches!(r, Err(Error::DanglingEdge { .. })));
    }

    #[test]
    fn self_loops_and_parallel_edges_are_rejected() {
        let nodes = vec![
            NodeSpec { id: 0, edges: vec![0, 1], table: vec![1.0; 4] },
            NodeSpec { id: 1, edges: vec![0, 1], table: vec![1.0; 4] },
        ];
        let edges = vec![EdgeSpec { id: 0, ends: [0, 1] }, EdgeSpec { id: 1, ends: [1, 0] }];
        assert!(matches!(ForneyGraph::build(nodes, edges), Err(Error::InvalidStructure(_))));
    }

    #[test]
    fn json_round_trip() {
        let g = ring(4, vec![1.0, 0.5, 0.5, 1.0]);
        let back = ForneyGraph::from_json_str(&g.to_json_string()).unwrap();
        assert_eq!(g, back);
    }
}
