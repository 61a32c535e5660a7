//! Combinatorial embeddings: an undirected simple graph together with a
//! rotation system (the cyclic order of incident edges at every vertex).
//!
//! Edges are traversed as *darts*. Dart `2e` runs `edges[e][0] -> edges[e][1]`
//! and dart `2e + 1` runs the other way. The face to the same side of every
//! dart is traced by the usual rule: after arriving at `v` along edge `e`,
//! leave along the rotation successor of `e` at `v`. Every dart lies on
//! exactly one face walk, and all walks keep their face on the same side.

use crate::error::{Error, Result};

/// A face of an embedding, as the cyclic sequence of darts bounding it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Face {
    pub darts: Vec<usize>,
}

impl Face {
    pub fn len(&self) -> usize {
        self.darts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.darts.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    n_vertices: usize,
    edges: Vec<[usize; 2]>,
    rotation: Vec<Vec<usize>>,
    // position of edge e in the rotation of its endpoint edges[e][side]
    slot: Vec<[usize; 2]>,
}

impl Embedding {
    /// Builds an embedding, checking that every edge appears exactly once in
    /// the rotation of each of its two (distinct) endpoints and nowhere else.
    pub fn new(n_vertices: usize, edges: Vec<[usize; 2]>, rotation: Vec<Vec<usize>>) -> Result<Self> {
        if rotation.len() != n_vertices {
            return Err(Error::InconsistentRotation(format!(
                "{} rotations for {} vertices",
                rotation.len(),
                n_vertices
            )));
        }
        let mut slot = vec![[usize::MAX; 2]; edges.len()];
        for (e, &[u, v]) in edges.iter().enumerate() {
            if u >= n_vertices || v >= n_vertices {
                return Err(Error::InconsistentRotation(format!("edge {e} has an out-of-range endpoint")));
            }
            if u == v {
                return Err(Error::InconsistentRotation(format!("edge {e} is a self-loop")));
            }
        }
        for (v, rot) in rotation.iter().enumerate() {
            for (pos, &e) in rot.iter().enumerate() {
                let ends = edges
                    .get(e)
                    .ok_or_else(|| Error::InconsistentRotation(format!("vertex {v} lists unknown edge {e}")))?;
                let side = if ends[0] == v {
                    0
                } else if ends[1] == v {
                    1
                } else {
                    return Err(Error::InconsistentRotation(format!("vertex {v} lists edge {e} it is not incident to")));
                };
                if slot[e][side] != usize::MAX {
                    return Err(Error::InconsistentRotation(format!("edge {e} listed twice at vertex {v}")));
                }
                slot[e][side] = pos;
            }
        }
        if let Some(e) = slot.iter().position(|s| s[0] == usize::MAX || s[1] == usize::MAX) {
            return Err(Error::InconsistentRotation(format!("edge {e} missing from an endpoint rotation")));
        }
        Ok(Embedding { n_vertices, edges, rotation, slot })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn rotation(&self, v: usize) -> &[usize] {
        &self.rotation[v]
    }

    pub fn n_darts(&self) -> usize {
        2 * self.edges.len()
    }

    #[inline]
    pub fn tail(&self, dart: usize) -> usize {
        self.edges[dart / 2][dart % 2]
    }

    #[inline]
    pub fn head(&self, dart: usize) -> usize {
        self.edges[dart / 2][1 - dart % 2]
    }

    /// Successor of `dart` along the face to its side.
    pub fn next_in_face(&self, dart: usize) -> usize {
        let e = dart / 2;
        let head_side = 1 - dart % 2;
        let v = self.edges[e][head_side];
        let rot = &self.rotation[v];
        let next_edge = rot[(self.slot[e][head_side] + 1) % rot.len()];
        let leave_side = if self.edges[next_edge][0] == v { 0 } else { 1 };
        2 * next_edge + leave_side
    }

    /// Traces every face walk. Faces are returned in order of their smallest dart.
    pub fn trace_faces(&self) -> Vec<Face> {
        let mut seen = vec![false; self.n_darts()];
        let mut faces = Vec::new();
        for start in 0..self.n_darts() {
            if seen[start] {
                continue;
            }
            let mut darts = Vec::new();
            let mut d = start;
            while !seen[d] {
                seen[d] = true;
                darts.push(d);
                d = self.next_in_face(d);
            }
            faces.push(Face { darts });
        }
        faces
    }

    /// Connected-component label per vertex and the number of components.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut label = vec![usize::MAX; self.n_vertices];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..self.n_vertices {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = count;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for &e in &self.rotation[v] {
                    let w = self.edges[e][0] + self.edges[e][1] - v;
                    if label[w] == usize::MAX {
                        label[w] = count;
                        stack.push(w);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    /// Checks V - E + F = 2 on every connected component, which holds exactly
    /// when the rotation system describes a planar embedding.
    pub fn check_euler(&self, faces: &[Face]) -> Result<()> {
        let (label, count) = self.components();
        let mut v = vec![0i64; count];
        let mut e = vec![0i64; count];
        let mut f = vec![0i64; count];
        for &c in &label {
            v[c] += 1;
        }
        for &[a, _] in &self.edges {
            e[label[a]] += 1;
        }
        for face in faces {
            f[label[self.tail(face.darts[0])]] += 1;
        }
        for c in 0..count {
            // a lone vertex bounds a single face that has no darts
            let faces_c = if e[c] == 0 { 1 } else { f[c] };
            let euler = v[c] - e[c] + faces_c;
            if euler != 2 {
                return Err(Error::NonPlanarEmbedding { euler });
            }
        }
        Ok(())
    }

    /// Traces faces and verifies Euler's formula.
    pub fn planar_faces(&self) -> Result<Vec<Face>> {
        let faces = self.trace_faces();
        self.check_euler(&faces)?;
        Ok(faces)
    }
}
