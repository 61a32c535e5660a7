use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::extend::ExtendedGraph;
use crate::embedding::{Embedding, Face};
use crate::error::{Error, Result};

/// Edge directions of an extended graph: `forward[e]` means
/// `ends[0] -> ends[1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KasteleynOrientation {
    pub forward: Vec<bool>,
    /// One exempt face per connected component, indexing the faces of
    /// [`Embedding::trace_faces`].
    pub outer_faces: Vec<usize>,
}

/// Number of darts of `face` that agree with the orientation.
pub fn co_oriented(face: &Face, forward: &[bool]) -> usize {
    face.darts.iter().filter(|&&d| (d % 2 == 0) == forward[d / 2]).count()
}

/// Orients every component so that each face other than its designated
/// outer face (the longest one) has an odd number of co-oriented darts.
///
/// A BFS spanning tree is oriented from lower to higher port index. The
/// remaining edges connect the faces into a tree; walking it from the leaves
/// towards the outer face, each face fixes the edge to its parent.
pub fn kasteleyn_orient(ext: &ExtendedGraph) -> Result<KasteleynOrientation> {
    let emb = ext.embedding()?;
    let faces = emb.planar_faces()?;
    orient_embedding(&emb, &faces)
}

pub(crate) fn orient_embedding(emb: &Embedding, faces: &[Face]) -> Result<KasteleynOrientation> {
    let m = emb.n_edges();
    let mut forward = vec![true; m];
    let mut in_tree = vec![false; m];
    let mut seen = vec![false; emb.n_vertices()];
    for s in 0..emb.n_vertices() {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &e in emb.rotation(v) {
                let [a, b] = emb.edges()[e];
                let w = a + b - v;
                if !seen[w] {
                    seen[w] = true;
                    in_tree[e] = true;
                    forward[e] = a < b;
                    queue.push_back(w);
                }
            }
        }
    }

    let mut face_of_dart = vec![usize::MAX; emb.n_darts()];
    for (f, face) in faces.iter().enumerate() {
        for &d in &face.darts {
            face_of_dart[d] = f;
        }
    }
    let (label, n_comp) = emb.components();
    let mut outer = vec![usize::MAX; n_comp];
    for (f, face) in faces.iter().enumerate() {
        let c = label[emb.tail(face.darts[0])];
        if outer[c] == usize::MAX || face.len() > faces[outer[c]].len() {
            outer[c] = f;
        }
    }

    // dual tree over faces through non-tree edges, rooted at each outer face
    let mut parent_edge = vec![usize::MAX; faces.len()];
    let mut visited = vec![false; faces.len()];
    let mut order = Vec::with_capacity(faces.len());
    for &root in outer.iter().filter(|&&f| f != usize::MAX) {
        visited[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(f) = queue.pop_front() {
            order.push(f);
            for &d in &faces[f].darts {
                let e = d / 2;
                if in_tree[e] {
                    continue;
                }
                let g = face_of_dart[d ^ 1];
                if !visited[g] {
                    visited[g] = true;
                    parent_edge[g] = e;
                    queue.push_back(g);
                }
            }
        }
    }
    if visited.iter().any(|v| !v) {
        return Err(Error::InvalidStructure("faces are not linked by non-tree edges".into()));
    }
    for &f in order.iter().rev() {
        let e = parent_edge[f];
        if e == usize::MAX {
            continue;
        }
        let face = &faces[f];
        let dart = *face.darts.iter().find(|&&d| d / 2 == e).expect("parent edge bounds its face");
        let others = face.darts.iter().filter(|&&d| d / 2 != e && (d % 2 == 0) == forward[d / 2]).count();
        // make the parent dart co-oriented exactly when the rest is even
        let want_co = others % 2 == 0;
        forward[e] = (dart % 2 == 0) == want_co;
    }
    let outer_faces = outer.into_iter().filter(|&f| f != usize::MAX).collect();
    Ok(KasteleynOrientation { forward, outer_faces })
}

/// Bounded faces (indices into the traced faces) with an even number of
/// co-oriented darts. Empty for a valid orientation.
pub fn odd_parity_violations(ext: &ExtendedGraph, orientation: &KasteleynOrientation) -> Result<Vec<usize>> {
    if orientation.forward.len() != ext.n_edges() {
        return Err(Error::InvalidStructure("orientation does not match the extended graph".into()));
    }
    let faces = ext.embedding()?.planar_faces()?;
    Ok((0..faces.len())
        .filter(|f| !orientation.outer_faces.contains(f))
        .filter(|&f| co_oriented(&faces[f], &orientation.forward).is_multiple_of(2))
        .collect())
}
