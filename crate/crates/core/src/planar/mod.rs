//! Fisher expansion of a 2-core into an extended graph whose perfect
//! matchings are the 2-regular loops, its Kasteleyn orientation, and the
//! skew matrices whose Pfaffians count those matchings.

mod extend;
mod kasteleyn;
mod matching;

pub use extend::{check_psi, fisher_extend, fisher_extend_with, ExtEdge, ExtEdgeKind, ExtendedGraph, Port};
pub use kasteleyn::{co_oriented, kasteleyn_orient, odd_parity_violations, KasteleynOrientation};
pub use matching::{enumerate_perfect_matchings, visit_perfect_matchings, MatchingLimits, MatchingSummary};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pfaffian::SkewMatrix;

/// An extended graph together with its orientation, as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientedExtension {
    pub graph: ExtendedGraph,
    pub orientation: KasteleynOrientation,
}

impl OrientedExtension {
    pub fn new(graph: ExtendedGraph) -> Result<Self> {
        let orientation = kasteleyn_orient(&graph)?;
        Ok(OrientedExtension { graph, orientation })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("extended graphs serialize")
    }

    /// Parses and validates both the embedding and the orientation length.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let ext: OrientedExtension = serde_json::from_str(s)?;
        ext.graph.validate()?;
        if ext.orientation.forward.len() != ext.graph.n_edges() {
            return Err(Error::InvalidStructure("orientation does not match the extended graph".into()));
        }
        Ok(ext)
    }

    pub fn skew_matrices(&self) -> Result<(SkewMatrix, SkewMatrix)> {
        build_skew_matrices(&self.graph, &self.orientation)
    }
}

/// `(A, B)` with `A[i][j] = +w` for an edge oriented `i -> j` of weight `w`
/// (and `-w` the other way), and `B` the same pattern with unit weights.
pub fn build_skew_matrices(ext: &ExtendedGraph, orientation: &KasteleynOrientation) -> Result<(SkewMatrix, SkewMatrix)> {
    if orientation.forward.len() != ext.n_edges() {
        return Err(Error::InvalidStructure("orientation does not match the extended graph".into()));
    }
    let n = ext.n_ports();
    let mut a = SkewMatrix::zeros(n)?;
    let mut b = SkewMatrix::zeros(n)?;
    for (e, edge) in ext.edges.iter().enumerate() {
        let [i, j] = if orientation.forward[e] { edge.ends } else { [edge.ends[1], edge.ends[0]] };
        a.set(i, j, edge.weight);
        b.set(i, j, 1.0);
    }
    Ok((a, b))
}
