use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::forney::ForneyGraph;
use crate::loops::CoreModel;

/// One gadget vertex: the end of core edge `node.edges[slot]` at `node`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    /// Core node index.
    pub node: usize,
    pub node_id: usize,
    pub slot: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ExtEdgeKind {
    /// Stands for core edge `edge`; matched iff the edge is not in the loop.
    External { edge: usize },
    /// Joins two ports of core node `node`; matched iff both edges are in the loop.
    Internal { node: usize, slots: [usize; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtEdge {
    pub ends: [usize; 2],
    pub weight: f64,
    pub kind: ExtEdgeKind,
}

/// The extended graph of a 2-core with the ports of the triplets in `psi`
/// (and their external edges) removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedGraph {
    /// Sorted by `(node_id, slot)`.
    pub ports: Vec<Port>,
    pub edges: Vec<ExtEdge>,
    /// Cyclic order of incident edges at every port.
    pub rotation: Vec<Vec<usize>>,
    /// Removed triplets, as ascending core node indices.
    pub psi: Vec<usize>,
}

impl ExtendedGraph {
    pub fn n_ports(&self) -> usize {
        self.ports.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn embedding(&self) -> Result<Embedding> {
        Embedding::new(self.ports.len(), self.edges.iter().map(|e| e.ends).collect(), self.rotation.clone())
    }

    /// Checks the rotation system and the Euler identity.
    pub fn validate(&self) -> Result<()> {
        for e in &self.edges {
            if !e.weight.is_finite() {
                return Err(Error::InvalidStructure("non-finite extended edge weight".into()));
            }
        }
        self.embedding()?.planar_faces().map(|_| ())
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("extended graphs serialize")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let ext: ExtendedGraph = serde_json::from_str(s)?;
        ext.validate()?;
        Ok(ext)
    }
}

/// Checks that `psi` is an even set of degree-3 core nodes; returns it sorted.
pub fn check_psi(core: &ForneyGraph, psi: &[usize]) -> Result<Vec<usize>> {
    let mut sorted = psi.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for &a in &sorted {
        if a >= core.n_nodes() || core.degree(a) != 3 {
            return Err(Error::PsiNotTriplet(if a < core.n_nodes() { core.node(a).id } else { a }));
        }
    }
    if sorted.len() % 2 == 1 {
        return Err(Error::OddPsi(sorted.len()));
    }
    Ok(sorted)
}

/// Fisher expansion of the model's 2-core, weighted by its vertex terms.
pub fn fisher_extend(model: &CoreModel, psi: &[usize]) -> Result<ExtendedGraph> {
    fisher_extend_with(model.graph(), &model.mu, psi)
}

/// Fisher expansion with explicit weights `mu[a][slot mask]`.
///
/// A degree-2 node becomes two ports joined by one internal edge; a degree-3
/// node becomes a triangle whose edge between ports `x` and `y` carries
/// `mu[a][{x, y}]`. External edges (weight 1) join the ports at both ends of
/// each core edge. Port rotations are `[external, next port, previous port]`,
/// which keeps the expansion inside the rotation wedge of the original node.
pub fn fisher_extend_with(core: &ForneyGraph, mu: &[[f64; 8]], psi: &[usize]) -> Result<ExtendedGraph> {
    if mu.len() != core.n_nodes() {
        return Err(Error::InvalidParams("one weight row per core node is required".into()));
    }
    if let Some(a) = (0..core.n_nodes()).find(|&a| !(2..=3).contains(&core.degree(a))) {
        return Err(Error::InvalidStructure(format!(
            "node {} has degree {}; the extension needs a 2-core with degrees 2 and 3",
            core.node(a).id,
            core.degree(a)
        )));
    }
    let psi = check_psi(core, psi)?;
    let removed = |a: usize| psi.binary_search(&a).is_ok();

    let mut order: Vec<usize> = (0..core.n_nodes()).filter(|&a| !removed(a)).collect();
    order.sort_by_key(|&a| core.node(a).id);
    let mut ports = Vec::new();
    let mut port_of = vec![[usize::MAX; 3]; core.n_nodes()];
    for &a in &order {
        for slot in 0..core.degree(a) {
            port_of[a][slot] = ports.len();
            ports.push(Port { node: a, node_id: core.node(a).id, slot });
        }
    }

    let mut edges = Vec::new();
    let mut external_at = vec![usize::MAX; ports.len()];
    for (e, var) in core.edges().iter().enumerate() {
        let [u, v] = var.ends;
        if removed(u.node) || removed(v.node) {
            continue;
        }
        let ends = [port_of[u.node][u.slot], port_of[v.node][v.slot]];
        external_at[ends[0]] = edges.len();
        external_at[ends[1]] = edges.len();
        edges.push(ExtEdge { ends, weight: 1.0, kind: ExtEdgeKind::External { edge: e } });
    }

    let mut internal = vec![[usize::MAX; 3]; core.n_nodes()];
    for &a in &order {
        let d = core.degree(a);
        // degree 2: one edge (slot 0, slot 1); degree 3: edges (i, i + 1)
        let pairs: &[[usize; 2]] = if d == 2 { &[[0, 1]] } else { &[[0, 1], [1, 2], [2, 0]] };
        for (k, &[x, y]) in pairs.iter().enumerate() {
            internal[a][k] = edges.len();
            edges.push(ExtEdge {
                ends: [port_of[a][x], port_of[a][y]],
                weight: mu[a][1 << x | 1 << y],
                kind: ExtEdgeKind::Internal { node: a, slots: [x, y] },
            });
        }
    }

    let rotation = ports
        .iter()
        .enumerate()
        .map(|(p, port)| {
            let a = port.node;
            let mut rot = Vec::with_capacity(3);
            if external_at[p] != usize::MAX {
                rot.push(external_at[p]);
            }
            if core.degree(a) == 2 {
                rot.push(internal[a][0]);
            } else {
                // edge k joins slots k and k + 1
                let i = port.slot;
                rot.push(internal[a][i]);
                rot.push(internal[a][(i + 2) % 3]);
            }
            rot
        })
        .collect();

    let ext = ExtendedGraph { ports, edges, rotation, psi };
    ext.embedding()?.planar_faces()?;
    Ok(ext)
}
