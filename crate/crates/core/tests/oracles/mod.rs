//! Brute-force reference computations shared by the integration tests.
//! Nothing here calls into the library's own solvers.
#![allow(dead_code)]

use std::collections::HashMap;

use loopcalc::forney::{ForneyGraph, IsingGrid};
use loopcalc::planar::ExtendedGraph;

/// Determinant by LU with partial pivoting.
pub fn determinant(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m = a.to_vec();
    let mut det = 1.0;
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
        if m[p][k] == 0.0 {
            return 0.0;
        }
        if p != k {
            m.swap(p, k);
            det = -det;
        }
        det *= m[k][k];
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                m[i][j] -= f * m[k][j];
            }
        }
    }
    det
}

/// Pfaffian as the signed sum over all perfect pairings.
pub fn pairing_sum(a: &[Vec<f64>]) -> f64 {
    fn rec(a: &[Vec<f64>], rest: &[usize]) -> f64 {
        if rest.is_empty() {
            return 1.0;
        }
        let i = rest[0];
        let mut total = 0.0;
        for k in 1..rest.len() {
            let j = rest[k];
            if a[i][j] == 0.0 {
                continue;
            }
            let sub: Vec<usize> = rest[1..].iter().copied().filter(|&x| x != j).collect();
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            total += sign * a[i][j] * rec(a, &sub);
        }
        total
    }
    let idx: Vec<usize> = (0..a.len()).collect();
    if a.len() % 2 == 1 {
        return 0.0;
    }
    rec(a, &idx)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log Z` of a Forney graph by summing over every edge assignment.
pub fn forney_log_z(g: &ForneyGraph) -> f64 {
    let e = g.n_edges();
    assert!(e <= 24, "{e} edges is too many for plain enumeration");
    let nodes: Vec<(&[usize], &[f64])> = g.nodes().iter().map(|n| (&n.edges[..], &n.table[..])).collect();
    let mut total = 0.0f64;
    for x in 0u64..1 << e {
        let mut w = 1.0;
        for (edges, table) in &nodes {
            let mut idx = 0;
            for (slot, &ed) in edges.iter().enumerate() {
                idx |= ((x >> ed) as usize & 1) << slot;
            }
            w *= table[idx];
            if w == 0.0 {
                break;
            }
        }
        total += w;
    }
    assert!(total.is_finite() && total > 0.0);
    total.ln()
}

/// `log Z` of an Ising grid by summing over every spin configuration.
pub fn ising_log_z(grid: &IsingGrid) -> f64 {
    let n = grid.params.rows * grid.params.cols;
    assert!(n <= 20);
    let couplings = grid.couplings();
    let s = |x: u32, i: usize| if x >> i & 1 == 1 { 1.0 } else { -1.0 };
    let energies: Vec<f64> = (0u32..1 << n)
        .map(|x| {
            let pair: f64 = couplings.iter().map(|&(i, j, jv)| jv * s(x, i) * s(x, j)).sum();
            let field: f64 = grid.fields.iter().enumerate().map(|(i, h)| h * s(x, i)).sum();
            pair + field
        })
        .collect();
    log_sum_exp(&energies)
}

/// Number and weighted sum of the perfect matchings of an extended graph.
///
/// Ports are visited in breadth-first order; each uncovered port is paired
/// with a later neighbor. Subproblems are keyed by the position and the set of
/// later ports already covered.
pub fn matchings(ext: &ExtendedGraph) -> (u64, f64) {
    let n = ext.ports.len();
    let mut adj = vec![Vec::new(); n];
    for edge in &ext.edges {
        adj[edge.ends[0]].push((edge.ends[1], edge.weight));
        adj[edge.ends[1]].push((edge.ends[0], edge.weight));
    }
    let mut pos = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    for root in 0..n {
        if pos[root] != usize::MAX {
            continue;
        }
        pos[root] = order.len();
        order.push(root);
        let mut head = order.len() - 1;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &(w, _) in &adj[v] {
                if pos[w] == usize::MAX {
                    pos[w] = order.len();
                    order.push(w);
                }
            }
        }
    }
    let later: Vec<Vec<(usize, f64)>> =
        order.iter().map(|&v| adj[v].iter().map(|&(w, x)| (pos[w], x)).filter(|&(j, _)| j > pos[v]).collect()).collect();

    fn rec(i: usize, ahead: Vec<usize>, later: &[Vec<(usize, f64)>], memo: &mut HashMap<(usize, Vec<usize>), (u64, f64)>) -> (u64, f64) {
        let (mut i, mut ahead) = (i, ahead);
        while ahead.first() == Some(&i) {
            ahead.remove(0);
            i += 1;
        }
        if i == later.len() {
            return (1, 1.0);
        }
        let key = (i, ahead);
        if let Some(&r) = memo.get(&key) {
            return r;
        }
        let (mut count, mut sum) = (0, 0.0);
        for &(j, w) in &later[i] {
            if key.1.binary_search(&j).is_ok() {
                continue;
            }
            let mut next = key.1.clone();
            next.insert(next.binary_search(&j).unwrap_err(), j);
            let (c, s) = rec(i + 1, next, later, memo);
            count += c;
            sum += w * s;
        }
        memo.insert(key, (count, sum));
        (count, sum)
    }
    rec(0, Vec::new(), &later, &mut HashMap::new())
}

/// `1 + sum r_C` over 2-regular loops, by scanning every edge subset of the
/// core. `mu[a][mask]` is the vertex term for the loop edges in `mask`.
pub fn two_regular_scan(core: &ForneyGraph, mu: &[[f64; 8]]) -> f64 {
    subset_scan(core, mu, |deg| deg == 0 || deg == 2)
}

/// `1 + sum r_C` over all generalized loops, by the same scan.
pub fn all_loops_scan(core: &ForneyGraph, mu: &[[f64; 8]]) -> f64 {
    subset_scan(core, mu, |deg| deg != 1)
}

fn subset_scan(core: &ForneyGraph, mu: &[[f64; 8]], keep: impl Fn(u32) -> bool) -> f64 {
    let e = core.n_edges();
    assert!(e <= 22);
    let mut total = 0.0;
    for x in 0u64..1 << e {
        let mut w = 1.0;
        let mut ok = true;
        for (a, node) in core.nodes().iter().enumerate() {
            let mut mask = 0;
            for (slot, &ed) in node.edges.iter().enumerate() {
                mask |= ((x >> ed) as usize & 1) << slot;
            }
            let deg = (mask as u32).count_ones();
            if !keep(deg) {
                ok = false;
                break;
            }
            if deg > 0 {
                w *= mu[a][mask];
            }
        }
        if ok {
            total += w;
        }
    }
    total
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
