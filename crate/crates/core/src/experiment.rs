//! Seeded sweeps over random Ising grids comparing `Z_BP`, `Z_empty` and a
//! truncated Pfaffian series against the exact partition function.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bp::{run_bp, BpConfig};
use crate::error::{Error, Result};
use crate::forney::{exact_log_z_with, ising_grid_forney, CouplingMode, ExactLimits, IsingParams};
use crate::loops::CoreModel;
use crate::series::{pfaffian_value, run_series, SeriesLimits};

/// `|log_z_true - log_z_approx| / |log_z_true|`.
pub fn error_metric(log_z_true: f64, log_z_approx: f64) -> Result<f64> {
    if log_z_true == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok((log_z_true - log_z_approx).abs() / log_z_true.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Grid sizes as `[rows, cols]`.
    pub sizes: Vec<[usize; 2]>,
    pub betas: Vec<f64>,
    pub thetas: Vec<f64>,
    pub mode: CouplingMode,
    /// Instances per `(size, beta, theta)` cell.
    pub instances: usize,
    /// Instance `i` of every cell uses seed `seed_base + i`.
    pub seed_base: u64,
    pub bp: BpConfig,
    /// Truncated series per instance; skipped when absent.
    pub series: Option<SeriesLimits>,
    /// Exact reference only for graphs with at most this many edges.
    pub exact_max_edges: usize,
    pub exact_max_search_nodes: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            sizes: vec![[4, 4]],
            betas: vec![0.1, 0.5, 1.0, 2.0],
            thetas: vec![0.1],
            mode: CouplingMode::Mixed,
            instances: 50,
            seed_base: 0,
            bp: BpConfig::default(),
            series: None,
            exact_max_edges: 100,
            exact_max_search_nodes: ExactLimits::default().max_search_nodes,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.bp.validate()?;
        for &[rows, cols] in &self.sizes {
            for &beta in &self.betas {
                for &theta in &self.thetas {
                    IsingParams { rows, cols, beta, theta, mode: self.mode, seed: 0 }.validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One CSV row. Missing values serialize as empty fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceRow {
    pub instance_id: usize,
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
    pub beta: f64,
    pub theta: f64,
    pub mode: CouplingMode,
    pub bp_converged: Option<bool>,
    pub bp_iters: Option<usize>,
    pub log_z_exact: Option<f64>,
    pub log_z_bp: Option<f64>,
    pub log_z_zempty: Option<f64>,
    pub log_z_series_k: Option<f64>,
    pub err_bp: Option<f64>,
    pub err_zempty: Option<f64>,
    pub err_series: Option<f64>,
    pub n_gext: Option<usize>,
    pub runtime_ms_bp: Option<f64>,
    pub runtime_ms_zempty: Option<f64>,
    /// Number of series terms evaluated.
    pub series_terms: Option<usize>,
    /// `ok`, or what went wrong.
    pub status: String,
}

pub const ROW_COLUMNS: [&str; 21] = [
    "instance_id",
    "seed",
    "rows",
    "cols",
    "beta",
    "theta",
    "mode",
    "bp_converged",
    "bp_iters",
    "log_z_exact",
    "log_z_bp",
    "log_z_zempty",
    "log_z_series_k",
    "err_bp",
    "err_zempty",
    "err_series",
    "n_gext",
    "runtime_ms_bp",
    "runtime_ms_zempty",
    "series_terms",
    "status",
];

/// Columns that depend on wall-clock time.
pub const RUNTIME_COLUMNS: [&str; 2] = ["runtime_ms_bp", "runtime_ms_zempty"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub rows: usize,
    pub cols: usize,
    pub beta: f64,
    pub theta: f64,
    pub mode: CouplingMode,
    pub instances: usize,
    pub bp_converged: usize,
    pub with_exact: usize,
    pub mean_err_bp: Option<f64>,
    pub median_err_bp: Option<f64>,
    pub mean_err_zempty: Option<f64>,
    pub median_err_zempty: Option<f64>,
    pub mean_err_series: Option<f64>,
    pub median_err_series: Option<f64>,
}

pub const SUMMARY_COLUMNS: [&str; 14] = [
    "rows",
    "cols",
    "beta",
    "theta",
    "mode",
    "instances",
    "bp_converged",
    "with_exact",
    "mean_err_bp",
    "median_err_bp",
    "mean_err_zempty",
    "median_err_zempty",
    "mean_err_series",
    "median_err_series",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<InstanceRow>,
    pub summaries: Vec<CellSummary>,
}

#[derive(Debug, Clone, Copy)]
struct Task {
    instance_id: usize,
    params: IsingParams,
}

/// Runs every instance (in parallel) and returns rows in instance order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let mut tasks = Vec::new();
    let mut cells = Vec::new();
    for &[rows, cols] in &config.sizes {
        for &beta in &config.betas {
            for &theta in &config.thetas {
                let first = tasks.len();
                for i in 0..config.instances {
                    let params =
                        IsingParams { rows, cols, beta, theta, mode: config.mode, seed: config.seed_base + i as u64 };
                    tasks.push(Task { instance_id: tasks.len(), params });
                }
                cells.push(first..tasks.len());
            }
        }
    }
    let rows: Vec<InstanceRow> = tasks.par_iter().map(|t| run_instance(config, t)).collect();
    let summaries = cells
        .into_iter()
        .filter(|r| !r.is_empty())
        .map(|r| summarize(&rows[r]))
        .collect();
    Ok(ExperimentOutput { rows, summaries })
}

fn run_instance(config: &ExperimentConfig, task: &Task) -> InstanceRow {
    let p = task.params;
    let mut row = InstanceRow {
        instance_id: task.instance_id,
        seed: p.seed,
        rows: p.rows,
        cols: p.cols,
        beta: p.beta,
        theta: p.theta,
        mode: p.mode,
        bp_converged: None,
        bp_iters: None,
        log_z_exact: None,
        log_z_bp: None,
        log_z_zempty: None,
        log_z_series_k: None,
        err_bp: None,
        err_zempty: None,
        err_series: None,
        n_gext: None,
        runtime_ms_bp: None,
        runtime_ms_zempty: None,
        series_terms: None,
        status: "ok".into(),
    };
    if let Err(e) = fill_instance(config, &mut row) {
        row.status = format!("error: {e}");
    }
    row
}

fn fill_instance(config: &ExperimentConfig, row: &mut InstanceRow) -> Result<()> {
    let params = IsingParams {
        rows: row.rows,
        cols: row.cols,
        beta: row.beta,
        theta: row.theta,
        mode: row.mode,
        seed: row.seed,
    };
    let graph = ising_grid_forney(params)?;
    let mut notes = Vec::new();

    let start = Instant::now();
    let bp = run_bp(&graph, &config.bp)?;
    row.runtime_ms_bp = Some(millis(start));
    row.bp_converged = Some(bp.converged);
    row.bp_iters = Some(bp.iterations);
    row.log_z_bp = Some(bp.bethe_log_z);

    let model = CoreModel::new(&graph, &bp)?;
    let start = Instant::now();
    let pv = pfaffian_value(&model, &[])?;
    row.runtime_ms_zempty = Some(millis(start));
    row.n_gext = Some(pv.n_ports);
    if pv.value.sign > 0.0 {
        row.log_z_zempty = Some(bp.bethe_log_z + pv.value.log_abs);
    } else {
        notes.push("z_empty <= 0");
    }

    if let Some(limits) = &config.series {
        let s = run_series(&model, limits)?;
        row.series_terms = Some(s.terms.len());
        row.log_z_series_k = s.log_z;
        if s.log_z.is_none() {
            notes.push("series z <= 0");
        }
    }

    if graph.n_edges() <= config.exact_max_edges {
        let limits = ExactLimits { max_search_nodes: config.exact_max_search_nodes };
        match exact_log_z_with(&graph, limits) {
            Ok(v) => row.log_z_exact = Some(v),
            Err(Error::TooLarge(_)) => notes.push("exact budget exceeded"),
            Err(e) => return Err(e),
        }
    }
    if let Some(exact) = row.log_z_exact {
        let err = |approx: Option<f64>| approx.and_then(|a| error_metric(exact, a).ok());
        row.err_bp = err(row.log_z_bp);
        row.err_zempty = err(row.log_z_zempty);
        row.err_series = err(row.log_z_series_k);
    }
    if !notes.is_empty() {
        row.status = notes.join("; ");
    }
    Ok(())
}

fn millis(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn mean_median(mut xs: Vec<f64>) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 { xs[n / 2] } else { 0.5 * (xs[n / 2 - 1] + xs[n / 2]) };
    (Some(mean), Some(median))
}

fn summarize(rows: &[InstanceRow]) -> CellSummary {
    let first = &rows[0];
    let collect = |f: fn(&InstanceRow) -> Option<f64>| mean_median(rows.iter().filter_map(f).collect());
    let (mean_err_bp, median_err_bp) = collect(|r| r.err_bp);
    let (mean_err_zempty, median_err_zempty) = collect(|r| r.err_zempty);
    let (mean_err_series, median_err_series) = collect(|r| r.err_series);
    CellSummary {
        rows: first.rows,
        cols: first.cols,
        beta: first.beta,
        theta: first.theta,
        mode: first.mode,
        instances: rows.len(),
        bp_converged: rows.iter().filter(|r| r.bp_converged == Some(true)).count(),
        with_exact: rows.iter().filter(|r| r.log_z_exact.is_some()).count(),
        mean_err_bp,
        median_err_bp,
        mean_err_zempty,
        median_err_zempty,
        mean_err_series,
        median_err_series,
    }
}

fn write_csv<W: Write, T: Serialize>(out: W, header: &[&str], records: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rows_csv<W: Write>(rows: &[InstanceRow], out: W) -> Result<()> {
    write_csv(out, &ROW_COLUMNS, rows)
}

pub fn write_summary_csv<W: Write>(summaries: &[CellSummary], out: W) -> Result<()> {
    write_csv(out, &SUMMARY_COLUMNS, summaries)
}

/// Drops the runtime columns from CSV text produced by [`write_rows_csv`].
pub fn strip_runtime_columns(csv_text: &str) -> Result<String> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(csv_text.as_bytes());
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut keep: Option<Vec<bool>> = None;
    for record in reader.records() {
        let record = record?;
        let mask = keep.get_or_insert_with(|| record.iter().map(|h| !RUNTIME_COLUMNS.contains(&h)).collect());
        writer.write_record(record.iter().zip(mask.iter()).filter(|(_, &k)| k).map(|(f, _)| f))?;
    }
    String::from_utf8(writer.into_inner().map_err(|e| Error::Io(e.to_string()))?).map_err(|e| Error::Format(e.to_string()))
}
