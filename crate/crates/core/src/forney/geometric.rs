use super::graph::{spin, EdgeSpec, ForneyGraph, NodeSpec};
use crate::error::Result;

/// Factor families used by the generators. All are symmetric under
/// permutations of the incident slots, so the table can be laid out after
/// the rotation is known.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Factor {
    /// Indicator that all incident spins agree.
    Equality,
    /// `exp(j * s0 * s1)` on a degree-2 node.
    Coupling(f64),
    /// `exp(h * s)` on a leaf.
    Field(f64),
    /// Explicit table; the caller guarantees it matches the final slot order.
    Table(Vec<f64>),
}

impl Factor {
    fn table(&self, degree: usize) -> Vec<f64> {
        let size = 1usize << degree;
        match self {
            Factor::Equality => (0..size).map(|x| if x == 0 || x == size - 1 { 1.0 } else { 0.0 }).collect(),
            Factor::Coupling(j) => {
                assert_eq!(degree, 2, "coupling factors join two variables");
                (0..size).map(|x| (j * spin(x, 0) * spin(x, 1)).exp()).collect()
            }
            Factor::Field(h) => {
                assert_eq!(degree, 1, "field factors sit on leaves");
                vec![(-h).exp(), h.exp()]
            }
            Factor::Table(t) => t.clone(),
        }
    }
}

/// Builds a Forney graph from a straight-line drawing: the rotation at each
/// node is the counter-clockwise order of its neighbors. Any drawing whose
/// induced rotation system passes the Euler check is accepted.
#[derive(Debug, Default)]
pub(crate) struct GeometricBuilder {
    pos: Vec<(f64, f64)>,
    factors: Vec<Factor>,
    edges: Vec<[usize; 2]>,
}

impl GeometricBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, pos: (f64, f64), factor: Factor) -> usize {
        self.pos.push(pos);
        self.factors.push(factor);
        self.pos.len() - 1
    }

    pub fn add_edge(&mut self, a: usize, b: usize) -> usize {
        self.edges.push([a, b]);
        self.edges.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.pos.len()
    }

    pub fn position(&self, node: usize) -> (f64, f64) {
        self.pos[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|e| e[0] == node || e[1] == node).count()
    }

    pub fn set_factor(&mut self, node: usize, factor: Factor) {
        self.factors[node] = factor;
    }

    /// Incident edges of every node sorted by angle.
    pub fn rotations(&self) -> Vec<Vec<usize>> {
        let mut rot = vec![Vec::new(); self.pos.len()];
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            rot[a].push(e);
            rot[b].push(e);
        }
        for (v, r) in rot.iter_mut().enumerate() {
            let (x, y) = self.pos[v];
            let angle = |e: usize| {
                let w = self.edges[e][0] + self.edges[e][1] - v;
                let (wx, wy) = self.pos[w];
                (wy - y).atan2(wx - x)
            };
            r.sort_by(|&e1, &e2| angle(e1).total_cmp(&angle(e2)));
        }
        rot
    }

    pub fn build(self) -> Result<ForneyGraph> {
        let rot = self.rotations();
        let nodes = rot
            .into_iter()
            .enumerate()
            .map(|(id, edges)| NodeSpec { id, table: self.factors[id].table(edges.len()), edges })
            .collect();
        let edges = self.edges.iter().enumerate().map(|(id, &ends)| EdgeSpec { id, ends }).collect();
        ForneyGraph::build(nodes, edges)
    }
}
