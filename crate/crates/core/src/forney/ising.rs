//! Ising grids in Forney form.
//!
//! Each grid coupling `exp(J s s')` becomes a degree-2 interaction node, each
//! local field `exp(h s)` a leaf. A site's spin is replicated over all its
//! incident variables by equality nodes: a site touching `k` variables
//! (grid neighbors plus its field leaf) gets a chain of `k - 2` degree-3
//! equality nodes, each owning an angularly contiguous group of ports so the
//! drawing stays planar.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::geometric::{Factor, GeometricBuilder};
use super::graph::ForneyGraph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingMode {
    /// Couplings and fields of either sign.
    Mixed,
    /// Absolute values of the drawn couplings and fields.
    #[serde(alias = "attractive-positive")]
    Attractive,
}

impl std::fmt::Display for CouplingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CouplingMode::Mixed => write!(f, "mixed"),
            CouplingMode::Attractive => write!(f, "attractive"),
        }
    }
}

impl std::str::FromStr for CouplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixed" => Ok(CouplingMode::Mixed),
            "attractive" | "attractive-positive" => Ok(CouplingMode::Attractive),
            other => Err(Error::InvalidParams(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsingParams {
    pub rows: usize,
    pub cols: usize,
    /// Coupling strength; couplings have variance `beta / 2`.
    pub beta: f64,
    /// Field scale; fields have variance `beta * theta`.
    pub theta: f64,
    pub mode: CouplingMode,
    pub seed: u64,
}

impl IsingParams {
    pub fn validate(&self) -> Result<()> {
        if self.rows < 2 || self.cols < 2 {
            return Err(Error::InvalidParams(format!("grid {}x{} is smaller than 2x2", self.rows, self.cols)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParams(format!("beta = {} must be finite and >= 0", self.beta)));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(Error::InvalidParams(format!("theta = {} must be finite and >= 0", self.theta)));
        }
        Ok(())
    }
}

/// Drawn grid parameters together with their Forney graph.
#[derive(Debug, Clone)]
pub struct IsingGrid {
    pub params: IsingParams,
    /// `horizontal[r * (cols - 1) + c]` couples `(r, c)` and `(r, c + 1)`.
    pub horizontal: Vec<f64>,
    /// `vertical[r * cols + c]` couples `(r, c)` and `(r + 1, c)`.
    pub vertical: Vec<f64>,
    /// `fields[r * cols + c]` acts on site `(r, c)`.
    pub fields: Vec<f64>,
    pub graph: ForneyGraph,
}

impl IsingGrid {
    /// Generates a grid. Variates come from ChaCha8 seeded with `seed` through
    /// the ziggurat standard normal, drawn in the order horizontal couplings,
    /// vertical couplings, fields (each row-major), and scaled afterwards, so
    /// one seed gives the same underlying draws for every `beta`/`theta`.
    pub fn generate(params: IsingParams) -> Result<Self> {
        params.validate()?;
        let IsingParams { rows, cols, beta, theta, mode, seed } = params;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize, std: f64| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let x = z * std;
                    match mode {
                        CouplingMode::Mixed => x,
                        CouplingMode::Attractive => x.abs(),
                    }
                })
                .collect()
        };
        let coupling_std = (beta / 2.0).sqrt();
        let field_std = (beta * theta).sqrt();
        let horizontal = draw(rows * (cols - 1), coupling_std);
        let vertical = draw((rows - 1) * cols, coupling_std);
        let fields = draw(rows * cols, field_std);
        let graph = build_grid(rows, cols, &horizontal, &vertical, &fields)?;
        Ok(IsingGrid { params, horizontal, vertical, fields, graph })
    }

    /// All grid couplings as `(site, site, J)` with sites indexed row-major.
    pub fn couplings(&self) -> Vec<(usize, usize, f64)> {
        let (rows, cols) = (self.params.rows, self.params.cols);
        let mut out = Vec::with_capacity(self.horizontal.len() + self.vertical.len());
        for r in 0..rows {
            for c in 0..cols - 1 {
                out.push((r * cols + c, r * cols + c + 1, self.horizontal[r * (cols - 1) + c]));
            }
        }
        for r in 0..rows - 1 {
            for c in 0..cols {
                out.push((r * cols + c, (r + 1) * cols + c, self.vertical[r * cols + c]));
            }
        }
        out
    }
}

/// Forney graph of an Ising grid with the given parameters.
pub fn ising_grid_forney(params: IsingParams) -> Result<ForneyGraph> {
    Ok(IsingGrid::generate(params)?.graph)
}

/// Builds the Forney graph for explicit coupling and field arrays (layout as
/// in [`IsingGrid`]).
pub fn build_grid(rows: usize, cols: usize, horizontal: &[f64], vertical: &[f64], fields: &[f64]) -> Result<ForneyGraph> {
    const SPACING: f64 = 10.0;
    let site_pos = |s: usize| ((s % cols) as f64 * SPACING, -((s / cols) as f64) * SPACING);
    let mut b = GeometricBuilder::new();

    // ports[s] = (target node, angle seen from the site)
    let mut ports: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows * cols];
    let add_port = |b: &GeometricBuilder, s: usize, target: usize, ports: &mut Vec<Vec<(usize, f64)>>| {
        let (x, y) = site_pos(s);
        let (tx, ty) = b.position(target);
        ports[s].push((target, (ty - y).atan2(tx - x)));
    };

    let couple = |b: &mut GeometricBuilder, s: usize, t: usize, j: f64, ports: &mut Vec<Vec<(usize, f64)>>| {
        let (p, q) = (site_pos(s), site_pos(t));
        let node = b.add_node(((p.0 + q.0) / 2.0, (p.1 + q.1) / 2.0), Factor::Coupling(j));
        add_port(b, s, node, ports);
        add_port(b, t, node, ports);
    };
    for r in 0..rows {
        for c in 0..cols - 1 {
            couple(&mut b, r * cols + c, r * cols + c + 1, horizontal[r * (cols - 1) + c], &mut ports);
        }
    }
    for r in 0..rows - 1 {
        for c in 0..cols {
            couple(&mut b, r * cols + c, (r + 1) * cols + c, vertical[r * cols + c], &mut ports);
        }
    }
    for (s, &h) in fields.iter().enumerate() {
        let (x, y) = site_pos(s);
        let leaf = b.add_node((x + 3.0, y + 3.0), Factor::Field(h));
        let (tx, ty) = b.position(leaf);
        ports[s].push((leaf, (ty - y).atan2(tx - x)));
    }

    for (s, site_ports) in ports.iter_mut().enumerate() {
        site_ports.sort_by(|a, b| a.1.total_cmp(&b.1));
        let groups: Vec<&[(usize, f64)]> = match site_ports.len() {
            0..=3 => vec![&site_ports[..]],
            4 => vec![&site_ports[0..2], &site_ports[2..4]],
            5 => vec![&site_ports[0..2], &site_ports[2..3], &site_ports[3..5]],
            k => unreachable!("grid site with {k} ports"),
        };
        let (x, y) = site_pos(s);
        let mut chain: Vec<usize> = Vec::with_capacity(groups.len());
        for group in &groups {
            let pos = if group.len() == 2 && groups.len() > 1 {
                let (sx, sy) = group.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.1.cos(), acc.1 + p.1.sin()));
                let norm = (sx * sx + sy * sy).sqrt();
                (x + 1.5 * sx / norm, y + 1.5 * sy / norm)
            } else {
                (x, y)
            };
            let eq = b.add_node(pos, Factor::Equality);
            for &(target, _) in group.iter() {
                b.add_edge(eq, target);
            }
            if let Some(&prev) = chain.last() {
                b.add_edge(prev, eq);
            }
            chain.push(eq);
        }
    }
    b.build()
}
