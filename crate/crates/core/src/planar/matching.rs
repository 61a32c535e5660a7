use super::extend::ExtendedGraph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchingLimits {
    /// Largest port count accepted.
    pub max_ports: usize,
    /// Abort after this many matchings.
    pub max_matchings: Option<u64>,
}

impl Default for MatchingLimits {
    fn default() -> Self {
        MatchingLimits { max_ports: 24, max_matchings: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchingSummary {
    pub count: u64,
    /// Sum over matchings of the product of edge weights.
    pub weighted_sum: f64,
}

/// Calls `visit` with the edge list and weight of every perfect matching.
///
/// Backtracks on the lowest uncovered port and prunes as soon as an
/// uncovered port has no uncovered neighbor left.
pub fn visit_perfect_matchings<F>(ext: &ExtendedGraph, limits: &MatchingLimits, mut visit: F) -> Result<MatchingSummary>
where
    F: FnMut(&[usize], f64),
{
    let n = ext.n_ports();
    if n > limits.max_ports {
        return Err(Error::TooLarge(format!("{n} ports exceed the matching enumeration cap of {}", limits.max_ports)));
    }
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (e, edge) in ext.edges.iter().enumerate() {
        let [a, b] = edge.ends;
        adj[a].push((b, e));
        adj[b].push((a, e));
    }
    let mut s = Search {
        ext,
        adj,
        covered: vec![false; n],
        free_deg: vec![0; n],
        chosen: Vec::new(),
        summary: MatchingSummary { count: 0, weighted_sum: 0.0 },
        limit: limits.max_matchings.unwrap_or(u64::MAX),
    };
    for v in 0..n {
        s.free_deg[v] = s.adj[v].len();
    }
    if n.is_multiple_of(2) && s.free_deg.iter().all(|&d| d > 0 || n == 0) {
        s.descend(0, 1.0, &mut visit)?;
    }
    Ok(s.summary)
}

/// All perfect matchings (as ascending edge lists) and their weighted sum.
pub fn enumerate_perfect_matchings(ext: &ExtendedGraph, limits: &MatchingLimits) -> Result<(Vec<Vec<usize>>, f64)> {
    let mut all = Vec::new();
    let summary = visit_perfect_matchings(ext, limits, |edges, _| {
        let mut m = edges.to_vec();
        m.sort_unstable();
        all.push(m);
    })?;
    all.sort();
    Ok((all, summary.weighted_sum))
}

struct Search<'a> {
    ext: &'a ExtendedGraph,
    adj: Vec<Vec<(usize, usize)>>,
    covered: Vec<bool>,
    // uncovered neighbors of each port
    free_deg: Vec<usize>,
    chosen: Vec<usize>,
    summary: MatchingSummary,
    limit: u64,
}

impl Search<'_> {
    fn descend<F: FnMut(&[usize], f64)>(&mut self, from: usize, weight: f64, visit: &mut F) -> Result<()> {
        let Some(v) = (from..self.covered.len()).find(|&v| !self.covered[v]) else {
            self.summary.count += 1;
            if self.summary.count > self.limit {
                return Err(Error::TooLarge(format!("more than {} perfect matchings", self.limit)));
            }
            self.summary.weighted_sum += weight;
            visit(&self.chosen, weight);
            return Ok(());
        };
        for k in 0..self.adj[v].len() {
            let (w, e) = self.adj[v][k];
            if self.covered[w] {
                continue;
            }
            self.cover(v);
            self.cover(w);
            if !self.strands_neighbor(v) && !self.strands_neighbor(w) {
                self.chosen.push(e);
                let r = self.descend(v + 1, weight * self.ext.edges[e].weight, visit);
                self.chosen.pop();
                if r.is_err() {
                    self.uncover(w);
                    self.uncover(v);
                    return r;
                }
            }
            self.uncover(w);
            self.uncover(v);
        }
        Ok(())
    }

    fn cover(&mut self, v: usize) {
        self.covered[v] = true;
        for &(w, _) in &self.adj[v] {
            self.free_deg[w] -= 1;
        }
    }

    /// Whether some uncovered neighbor of `v` has no uncovered neighbor left.
    fn strands_neighbor(&self, v: usize) -> bool {
        self.adj[v].iter().any(|&(w, _)| !self.covered[w] && self.free_deg[w] == 0)
    }

    fn uncover(&mut self, v: usize) {
        self.covered[v] = false;
        for &(w, _) in &self.adj[v] {
            self.free_deg[w] += 1;
        }
    }
}
