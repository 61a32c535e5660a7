//! The Pfaffian series `z = sum_Psi z_Psi * prod_{a in Psi} mu_{a; a}`
//! over even sets `Psi` of triplets, with `z_Psi = sign(Pf B_Psi) Pf A_Psi`.
//!
//! The `Psi = {}` term alone is `z_empty`, the sum over all 2-regular loops.

use std::io::Write;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::loops::CoreModel;
use crate::pfaffian::{pfaffian_signed_log, SignedLog};
use crate::planar::{build_skew_matrices, check_psi, fisher_extend, kasteleyn_orient};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PfaffianTerm {
    /// Core node indices, ascending by id.
    pub psi: Vec<usize>,
    pub psi_ids: Vec<usize>,
    pub z_psi: f64,
    /// `prod_{a in Psi} mu_{a; a}`; 1 for the empty set.
    pub mu_prefactor: f64,
    /// `z_psi * mu_prefactor`.
    pub contribution: f64,
    /// Port count of the extended graph.
    pub n_ports: usize,
    pub millis: f64,
}

/// `z_Psi` as sign and log magnitude, together with the extended graph size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfaffianValue {
    pub value: SignedLog,
    pub n_ports: usize,
}

/// Builds, orients and evaluates the extension for `psi` (core node indices).
pub fn pfaffian_value(model: &CoreModel, psi: &[usize]) -> Result<PfaffianValue> {
    let ext = fisher_extend(model, psi)?;
    let orientation = kasteleyn_orient(&ext)?;
    let (a, b) = build_skew_matrices(&ext, &orientation)?;
    let pf_b = pfaffian_signed_log(&b);
    let value = if pf_b.is_zero() {
        SignedLog::ZERO
    } else {
        let pf_a = pfaffian_signed_log(&a);
        SignedLog { sign: pf_b.sign * pf_a.sign, log_abs: pf_a.log_abs }
    };
    Ok(PfaffianValue { value, n_ports: ext.n_ports() })
}

/// `z_empty`: 1 plus the sum of all 2-regular loop terms.
pub fn z_empty(model: &CoreModel) -> Result<f64> {
    Ok(pfaffian_value(model, &[])?.value.value())
}

/// One term of the series.
pub fn pfaffian_term(model: &CoreModel, psi: &[usize]) -> Result<PfaffianTerm> {
    let start = Instant::now();
    let g = model.graph();
    let mut psi = check_psi(g, psi)?;
    psi.sort_by_key(|&a| g.node(a).id);
    let pv = pfaffian_value(model, &psi)?;
    let z_psi = pv.value.value();
    let mu_prefactor: f64 = psi.iter().map(|&a| model.triple_mu(a)).product();
    Ok(PfaffianTerm {
        psi_ids: psi.iter().map(|&a| g.node(a).id).collect(),
        psi,
        z_psi,
        mu_prefactor,
        contribution: if z_psi == 0.0 { 0.0 } else { z_psi * mu_prefactor },
        n_ports: pv.n_ports,
        millis: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SeriesLimits {
    /// Largest `|Psi|` evaluated.
    pub max_subset_size: Option<usize>,
    pub max_terms: Option<usize>,
    /// Wall-clock budget checked before each term after the first.
    #[serde(with = "millis_opt")]
    pub time_budget: Option<Duration>,
}

mod millis_opt {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
        match d {
            Some(d) => s.serialize_some(&(d.as_millis() as u64)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Duration>, D::Error> {
        Ok(Option::<u64>::deserialize(d)?.map(Duration::from_millis))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    Exhausted,
    Budget,
    TermCap,
    SubsetCap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesResult {
    pub log_z_bp: f64,
    pub bp_converged: bool,
    pub terms: Vec<PfaffianTerm>,
    /// `z` after each term.
    pub running: Vec<f64>,
    pub z: f64,
    /// `log Z_BP + log z`, or `None` when `z <= 0`.
    pub log_z: Option<f64>,
    pub truncation: Truncation,
}

impl SeriesResult {
    pub fn non_positive_z(&self) -> bool {
        self.z <= 0.0
    }
}

/// Sums the series over even triplet sets in order of size, then
/// lexicographically by node id, calling `on_term` as each term completes.
pub fn run_series_with<F>(model: &CoreModel, limits: &SeriesLimits, mut on_term: F) -> Result<SeriesResult>
where
    F: FnMut(&PfaffianTerm, f64),
{
    let start = Instant::now();
    let g = model.graph();
    let mut triplets = model.core.triplets();
    triplets.sort_by_key(|&a| g.node(a).id);
    let t = triplets.len();

    let mut terms = Vec::new();
    let mut running = Vec::new();
    let mut z = 0.0;
    let mut truncation = Truncation::Exhausted;
    'sizes: for k in (0..=t).step_by(2) {
        if limits.max_subset_size.is_some_and(|m| k > m) {
            truncation = Truncation::SubsetCap;
            break;
        }
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            if !terms.is_empty() {
                if limits.max_terms.is_some_and(|m| terms.len() >= m) {
                    truncation = Truncation::TermCap;
                    break 'sizes;
                }
                if limits.time_budget.is_some_and(|b| start.elapsed() >= b) {
                    truncation = Truncation::Budget;
                    break 'sizes;
                }
            }
            let psi: Vec<usize> = idx.iter().map(|&i| triplets[i]).collect();
            let term = pfaffian_term(model, &psi)?;
            z += term.contribution;
            running.push(z);
            on_term(&term, z);
            terms.push(term);
            if !next_combination(&mut idx, t) {
                break;
            }
        }
    }
    Ok(SeriesResult {
        log_z_bp: model.log_z_bp,
        bp_converged: model.bp_converged,
        terms,
        running,
        z,
        log_z: (z > 0.0).then(|| model.log_z_bp + z.ln()),
        truncation,
    })
}

pub fn run_series(model: &CoreModel, limits: &SeriesLimits) -> Result<SeriesResult> {
    run_series_with(model, limits, |_, _| {})
}

/// Advances `idx` to the next `k`-subset of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Writes `psi, z_psi, mu_prefactor, Z_psi, running_z, ms` rows.
pub fn write_terms_csv<W: Write>(result: &SeriesResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["psi", "z_psi", "mu_prefactor", "Z_psi", "running_z", "ms"])?;
    for (term, running) in result.terms.iter().zip(&result.running) {
        let psi: Vec<String> = term.psi_ids.iter().map(|id| id.to_string()).collect();
        w.write_record([
            psi.join(" "),
            term.z_psi.to_string(),
            term.mu_prefactor.to_string(),
            term.contribution.to_string(),
            running.to_string(),
            format!("{:.3}", term.millis),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bp::{run_bp, BpConfig};
    use crate::forney::{
        exact_log_z, ising_grid_forney, random_planar_forney, random_tree_forney, two_core, CouplingMode, ForneyGraph,
        IsingParams, RandomPlanarOptions,
    };
    use crate::loops::{visit_loops, CoreModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model_of(g: &ForneyGraph) -> CoreModel {
        let bp = run_bp(g, &BpConfig::default()).unwrap();
        CoreModel::new(g, &bp).unwrap()
    }

    fn grid(rows: usize, cols: usize, beta: f64, theta: f64, mode: CouplingMode, seed: u64) -> ForneyGraph {
        ising_grid_forney(IsingParams { rows, cols, beta, theta, mode, seed }).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn combinations_in_lexicographic_order() {
        let mut idx = vec![0, 1];
        let mut seen = vec![idx.clone()];
        while next_combination(&mut idx, 4) {
            seen.push(idx.clone());
        }
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        let mut empty: Vec<usize> = vec![];
        assert!(!next_combination(&mut empty, 3));
    }

    #[test]
    fn trees_have_unit_z_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [1, 2, 7, 15] {
            let g = random_tree_forney(&mut rng, n, (0.2, 2.0)).unwrap();
            let m = model_of(&g);
            assert!(m.core.is_null());
            assert_eq!(z_empty(&m).unwrap(), 1.0);
            let r = run_series(&m, &SeriesLimits::default()).unwrap();
            assert_eq!(r.terms.len(), 1);
            assert_eq!(r.z, 1.0);
        }
    }

    #[test]
    fn uniform_factors_have_unit_z_empty() {
        let m = model_of(&grid(3, 3, 0.0, 0.0, CouplingMode::Mixed, 0));
        assert!((z_empty(&m).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_field_grid_is_solved_by_z_empty() {
        let g = grid(4, 4, 1.0, 0.0, CouplingMode::Mixed, 3);
        let m = model_of(&g);
        let exact = exact_log_z(&g).unwrap();
        let log_z = m.log_z_bp + z_empty(&m).unwrap().ln();
        assert!(close(log_z, exact, 1e-8), "{log_z} vs {exact}");
    }

    #[test]
    fn empty_term_is_z_empty() {
        let m = model_of(&grid(3, 3, 0.7, 0.4, CouplingMode::Mixed, 5));
        let t = pfaffian_term(&m, &[]).unwrap();
        assert_eq!(t.z_psi, z_empty(&m).unwrap());
        assert_eq!(t.mu_prefactor, 1.0);
        assert!(t.psi.is_empty());
    }

    fn random_models(seed: u64, count: usize, min_triplets: usize, max_core_edges: usize) -> Vec<(ForneyGraph, CoreModel)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        while out.len() < count {
            let g = random_planar_forney(&mut rng, &RandomPlanarOptions::default()).unwrap();
            let core = two_core(&g).unwrap();
            if core.triplets().len() >= min_triplets && core.graph.n_edges() <= max_core_edges {
                let m = model_of(&g);
                out.push((g, m));
            }
        }
        out
    }

    #[test]
    fn terms_group_loops_by_triplet_set() {
        for (_, m) in random_models(3, 25, 2, 16) {
            let r = run_series(&m, &SeriesLimits::default()).unwrap();
            for term in &r.terms {
                let mut psi = term.psi.clone();
                psi.sort_unstable();
                let mut expected = if psi.is_empty() { 1.0 } else { 0.0 };
                visit_loops(m.graph(), &m.mu, None, |v| {
                    if v.triplets() == psi {
                        expected += v.weight;
                    }
                })
                .unwrap();
                assert!((term.contribution - expected).abs() < 1e-9 * (1.0 + expected.abs()));
            }
        }
    }

    #[test]
    fn exhaustive_series_is_exact() {
        for (g, m) in random_models(21, 25, 2, 16) {
            let r = run_series(&m, &SeriesLimits::default()).unwrap();
            assert_eq!(r.truncation, Truncation::Exhausted);
            let t = m.core.triplets().len();
            assert_eq!(r.terms.len(), 1 << (t - 1));
            let z_true = (exact_log_z(&g).unwrap() - m.log_z_bp).exp();
            assert!(close(r.z, z_true, 1e-8), "{} vs {z_true}", r.z);
            let mut loop_z = 1.0;
            visit_loops(m.graph(), &m.mu, None, |v| loop_z += v.weight).unwrap();
            assert!(close(r.z, loop_z, 1e-8));
            assert!((r.running.last().unwrap() - r.z).abs() == 0.0);
        }
    }

    #[test]
    fn no_triplets_single_term() {
        let g = grid(2, 2, 0.8, 0.5, CouplingMode::Mixed, 2);
        let m = model_of(&g);
        assert!(m.core.triplets().is_empty());
        let r = run_series(&m, &SeriesLimits::default()).unwrap();
        assert_eq!(r.terms.len(), 1);
        let z_true = (exact_log_z(&g).unwrap() - m.log_z_bp).exp();
        assert!(close(r.z, z_true, 1e-10));
    }

    #[test]
    fn zero_field_higher_terms_vanish() {
        let m = model_of(&grid(3, 3, 1.0, 0.0, CouplingMode::Mixed, 4));
        let r = run_series(&m, &SeriesLimits { max_subset_size: Some(4), ..Default::default() }).unwrap();
        assert!(r.terms.len() > 1);
        assert!(r.terms[1..].iter().all(|t| t.contribution.abs() <= 1e-10));
    }

    #[test]
    fn attractive_terms_are_non_negative() {
        for seed in 0..4 {
            let m = model_of(&grid(3, 3, 0.9, 0.6, CouplingMode::Attractive, seed));
            assert!(z_empty(&m).unwrap() >= 1.0 - 1e-10);
            let r = run_series(&m, &SeriesLimits { max_subset_size: Some(2), ..Default::default() }).unwrap();
            assert!(r.terms.iter().all(|t| t.contribution >= -1e-10));
        }
    }

    #[test]
    fn limits_truncate() {
        let m = model_of(&grid(3, 3, 0.5, 0.5, CouplingMode::Mixed, 1));
        let t = m.core.triplets().len();
        assert!(t >= 4);
        let capped = run_series(&m, &SeriesLimits { max_terms: Some(3), ..Default::default() }).unwrap();
        assert_eq!(capped.terms.len(), 3);
        assert_eq!(capped.truncation, Truncation::TermCap);
        let sized = run_series(&m, &SeriesLimits { max_subset_size: Some(0), ..Default::default() }).unwrap();
        assert_eq!(sized.terms.len(), 1);
        assert_eq!(sized.truncation, Truncation::SubsetCap);
        let budget = SeriesLimits { time_budget: Some(Duration::ZERO), ..Default::default() };
        let timed = run_series(&m, &budget).unwrap();
        assert_eq!(timed.terms.len(), 1);
        assert_eq!(timed.truncation, Truncation::Budget);
        // pairs come in lexicographic id order after the empty set
        let two = run_series(&m, &SeriesLimits { max_subset_size: Some(2), ..Default::default() }).unwrap();
        assert_eq!(two.terms.len(), 1 + t * (t - 1) / 2);
        let ids: Vec<Vec<usize>> = two.terms.iter().map(|t| t.psi_ids.clone()).collect();
        let mut sorted = ids[1..].to_vec();
        sorted.sort();
        assert_eq!(&ids[1..], &sorted[..]);
    }

    #[test]
    fn deterministic_and_streamed() {
        let m = model_of(&grid(3, 3, 0.5, 0.3, CouplingMode::Mixed, 6));
        let limits = SeriesLimits { max_subset_size: Some(2), ..Default::default() };
        let mut streamed = Vec::new();
        let a = run_series_with(&m, &limits, |t, z| streamed.push((t.psi.clone(), z))).unwrap();
        let b = run_series(&m, &limits).unwrap();
        let strip = |r: &SeriesResult| r.terms.iter().map(|t| (t.psi.clone(), t.z_psi, t.contribution)).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(streamed.len(), a.terms.len());
        assert_eq!(streamed.last().unwrap().1, a.z);
    }

    #[test]
    fn invalid_psi() {
        let m = model_of(&grid(3, 3, 0.5, 0.3, CouplingMode::Mixed, 6));
        let t = m.core.triplets();
        assert!(matches!(pfaffian_term(&m, &t[..1]), Err(crate::Error::OddPsi(1))));
        let two = (0..m.graph().n_nodes()).find(|&a| m.graph().degree(a) == 2).unwrap();
        assert!(matches!(pfaffian_term(&m, &[t[0], two]), Err(crate::Error::PsiNotTriplet(_))));
    }

    #[test]
    fn csv_output() {
        let m = model_of(&grid(3, 3, 0.5, 0.3, CouplingMode::Mixed, 6));
        let r = run_series(&m, &SeriesLimits { max_terms: Some(2), ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        write_terms_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "psi,z_psi,mu_prefactor,Z_psi,running_z,ms");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with(",")); // empty psi
    }
}
