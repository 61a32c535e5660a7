use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use loopcalc::bp::{run_bp, BpConfig, BpResult, Schedule};
use loopcalc::experiment::{run_experiment, write_rows_csv, write_summary_csv, ExperimentConfig};
use loopcalc::forney::{exact_log_z_with, ising_grid_forney, CouplingMode, ExactLimits, ForneyGraph, IsingParams};
use loopcalc::loops::{
    enumerate_generalized_loops, loop_terms, rank_loop_terms, truncated_loop_series, two_regular_filter, CoreModel,
    LoopLimits,
};
use loopcalc::pfaffian::pfaffian_signed_log;
use loopcalc::planar::{enumerate_perfect_matchings, fisher_extend, MatchingLimits, OrientedExtension};
use loopcalc::series::{pfaffian_value, run_series, write_terms_csv, SeriesLimits};

#[derive(Parser)]
#[command(name = "loopcalc", version, about = "Loop calculus for binary planar graphical models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random Ising grid in Forney form.
    GenGrid {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long, default_value_t = CouplingMode::Mixed)]
        mode: CouplingMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact log Z by enumeration.
    Exact {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = ExactLimits::default().max_search_nodes)]
        max_search_nodes: u64,
    },
    /// Belief propagation and the Bethe estimate of log Z.
    Bp {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        bp: BpArgs,
    },
    /// Enumerate generalized loops of the 2-core with their weights.
    Loops {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 20)]
        max_edges: usize,
        /// Keep only loops whose nodes all have degree 2.
        #[arg(long)]
        two_regular: bool,
        /// Also report the series restricted to the `l` largest terms.
        #[arg(long, value_name = "L")]
        truncate: Option<usize>,
        #[command(flatten)]
        bp: BpArgs,
    },
    /// Build the oriented extended graph of the 2-core.
    Extend {
        #[arg(long = "in")]
        input: PathBuf,
        /// Comma-separated node ids of an even set of degree-3 core nodes.
        #[arg(long, default_value = "")]
        psi: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        bp: BpArgs,
    },
    /// Enumerate perfect matchings of an extended graph.
    Matchings {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 24)]
        max_ports: usize,
        /// Print every matching as a list of extended edge indices.
        #[arg(long)]
        list: bool,
    },
    /// Z_BP corrected by all 2-regular loops.
    Zempty {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        bp: BpArgs,
    },
    /// The Pfaffian series over even triplet sets.
    Pfseries {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        max_subset_size: Option<usize>,
        #[arg(long)]
        max_terms: Option<usize>,
        #[arg(long)]
        budget_ms: Option<u64>,
        /// Per-term CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        bp: BpArgs,
    },
    /// Run a seeded sweep described by a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-cell summary CSV; defaults to `<out stem>.summary.csv`.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

#[derive(Args)]
struct BpArgs {
    #[arg(long, default_value_t = BpConfig::default().damping)]
    damping: f64,
    #[arg(long, default_value_t = BpConfig::default().tolerance)]
    tol: f64,
    #[arg(long, default_value_t = BpConfig::default().max_iters)]
    max_iters: usize,
    #[arg(long, default_value = "sequential", value_parser = parse_schedule)]
    schedule: Schedule,
}

impl BpArgs {
    fn config(&self) -> BpConfig {
        BpConfig { damping: self.damping, tolerance: self.tol, max_iters: self.max_iters, schedule: self.schedule }
    }

    fn run(&self, graph: &ForneyGraph) -> Result<BpResult> {
        Ok(run_bp(graph, &self.config())?)
    }
}

fn parse_schedule(s: &str) -> std::result::Result<Schedule, String> {
    match s {
        "sequential" => Ok(Schedule::Sequential),
        "parallel" => Ok(Schedule::Parallel),
        _ => Err(format!("unknown schedule `{s}` (sequential|parallel)")),
    }
}

fn read_graph(path: &Path) -> Result<ForneyGraph> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ForneyGraph::from_json_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn print_json(v: &Value) -> Result<()> {
    emit(None, &serde_json::to_string_pretty(v)?)
}

fn parse_psi(spec: &str, core: &ForneyGraph) -> Result<Vec<usize>> {
    let mut psi = Vec::new();
    for tok in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let id: usize = tok.parse().with_context(|| format!("bad node id `{tok}`"))?;
        match core.node_by_id(id) {
            Some(a) => psi.push(a),
            None => bail!("node {id} is not in the 2-core"),
        }
    }
    Ok(psi)
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenGrid { rows, cols, beta, theta, mode, seed, out } => {
            let graph = ising_grid_forney(IsingParams { rows, cols, beta, theta, mode, seed })?;
            emit(out.as_deref(), &graph.to_json_string())
        }
        Command::Exact { input, max_search_nodes } => {
            let graph = read_graph(&input)?;
            let start = Instant::now();
            let log_z = exact_log_z_with(&graph, ExactLimits { max_search_nodes })?;
            print_json(&json!({
                "log_z": log_z,
                "n_nodes": graph.n_nodes(),
                "n_edges": graph.n_edges(),
                "runtime_ms": start.elapsed().as_secs_f64() * 1e3,
            }))
        }
        Command::Bp { input, bp } => {
            let graph = read_graph(&input)?;
            let r = bp.run(&graph)?;
            print_json(&json!({
                "bethe_log_z": r.bethe_log_z,
                "converged": r.converged,
                "iterations": r.iterations,
                "residual": r.residual,
            }))
        }
        Command::Loops { input, max_edges, two_regular, truncate, bp } => {
            let graph = read_graph(&input)?;
            let r = bp.run(&graph)?;
            let model = CoreModel::new(&graph, &r)?;
            let core = model.graph();
            let mut loops = enumerate_generalized_loops(core, &LoopLimits { max_edges, max_loops: None })?;
            if two_regular {
                loops = two_regular_filter(&loops);
            }
            let terms = loop_terms(&model, &loops);
            let listed: Vec<Value> = terms
                .iter()
                .map(|t| {
                    let ids: Vec<usize> = t.lp.edges.iter().map(|&e| core.edge(e).id).collect();
                    json!({ "edges": ids, "r_C": t.weight })
                })
                .collect();
            let mut ranked = terms.clone();
            rank_loop_terms(&mut ranked, core);
            let mut partial = Vec::with_capacity(ranked.len());
            let mut acc = 1.0;
            for t in &ranked {
                acc += t.weight;
                partial.push(acc);
            }
            let all = truncated_loop_series(r.bethe_log_z, &ranked, ranked.len());
            let mut out = json!({
                "log_z_bp": r.bethe_log_z,
                "bp_converged": r.converged,
                "core_edges": core.n_edges(),
                "count": loops.len(),
                "loops": listed,
                "ranked_partial_sums": partial,
                "correction": all.correction,
                "log_z": all.log_z,
            });
            if let Some(l) = truncate {
                let t = truncated_loop_series(r.bethe_log_z, &ranked, l);
                out["truncated"] = json!({ "l": t.terms_used, "correction": t.correction, "log_z": t.log_z });
            }
            print_json(&out)
        }
        Command::Extend { input, psi, out, bp } => {
            let graph = read_graph(&input)?;
            let r = bp.run(&graph)?;
            let model = CoreModel::new(&graph, &r)?;
            let psi = parse_psi(&psi, model.graph())?;
            let ext = OrientedExtension::new(fisher_extend(&model, &psi)?)?;
            emit(out.as_deref(), &ext.to_json_string())
        }
        Command::Matchings { input, max_ports, list } => {
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let ext = OrientedExtension::from_json_str(&text)?;
            let (all, weighted_sum) =
                enumerate_perfect_matchings(&ext.graph, &MatchingLimits { max_ports, max_matchings: None })?;
            let (a, b) = ext.skew_matrices()?;
            let (pf_a, pf_b) = (pfaffian_signed_log(&a), pfaffian_signed_log(&b));
            let mut out = json!({
                "ports": ext.graph.n_ports(),
                "count": all.len(),
                "weighted_sum": weighted_sum,
                "pfaffian_a": finite(pf_a.value()),
                "pfaffian_b": finite(pf_b.value()),
                "z_psi": finite(pf_b.sign * pf_a.value()),
            });
            if list {
                out["matchings"] = json!(all);
            }
            print_json(&out)
        }
        Command::Zempty { input, bp } => {
            let graph = read_graph(&input)?;
            let start = Instant::now();
            let r = bp.run(&graph)?;
            let bp_ms = start.elapsed().as_secs_f64() * 1e3;
            let model = CoreModel::new(&graph, &r)?;
            let start = Instant::now();
            let pv = pfaffian_value(&model, &[])?;
            let log_z = (pv.value.sign > 0.0).then_some(r.bethe_log_z + pv.value.log_abs);
            print_json(&json!({
                "log_z_bp": r.bethe_log_z,
                "bp_converged": r.converged,
                "z_empty": finite(pv.value.value()),
                "log_z_empty": log_z,
                "n_gext": pv.n_ports,
                "runtime_ms_bp": bp_ms,
                "runtime_ms_zempty": start.elapsed().as_secs_f64() * 1e3,
            }))
        }
        Command::Pfseries { input, max_subset_size, max_terms, budget_ms, out, bp } => {
            let graph = read_graph(&input)?;
            let r = bp.run(&graph)?;
            let model = CoreModel::new(&graph, &r)?;
            let limits = SeriesLimits { max_subset_size, max_terms, time_budget: budget_ms.map(Duration::from_millis) };
            let s = run_series(&model, &limits)?;
            match out {
                Some(path) => {
                    let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    write_terms_csv(&s, file)?;
                    print_json(&json!({
                        "log_z_bp": s.log_z_bp,
                        "bp_converged": s.bp_converged,
                        "terms": s.terms.len(),
                        "triplets": model.core.triplets().len(),
                        "z": s.z,
                        "log_z": s.log_z,
                        "non_positive_z": s.non_positive_z(),
                        "truncation": s.truncation,
                    }))
                }
                None => write_terms_csv(&s, io::stdout().lock()).map_err(Into::into),
            }
        }
        Command::Experiment { config, out, summary } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg = ExperimentConfig::from_json_str(&text).with_context(|| format!("invalid config {}", config.display()))?;
            let result = run_experiment(&cfg)?;
            let file = fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            write_rows_csv(&result.rows, file)?;
            let summary = summary.unwrap_or_else(|| out.with_extension("summary.csv"));
            let file = fs::File::create(&summary).with_context(|| format!("creating {}", summary.display()))?;
            write_summary_csv(&result.summaries, file)?;
            eprintln!("{} rows -> {}, {} cells -> {}", result.rows.len(), out.display(), result.summaries.len(), summary.display());
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn schedules() {
        assert_eq!(parse_schedule("parallel").unwrap(), Schedule::Parallel);
        assert_eq!(parse_schedule("sequential").unwrap(), Schedule::Sequential);
        assert!(parse_schedule("random").is_err());
    }

    #[test]
    fn psi_lists() {
        let g = ising_grid_forney(IsingParams {
            rows: 3,
            cols: 3,
            beta: 0.5,
            theta: 0.1,
            mode: CouplingMode::Mixed,
            seed: 7,
        })
        .unwrap();
        let id = g.nodes()[4].id;
        assert_eq!(parse_psi(&format!(" {id} ,"), &g).unwrap(), vec![4]);
        assert!(parse_psi("", &g).unwrap().is_empty());
        assert!(parse_psi("x", &g).is_err());
        assert!(parse_psi("99999", &g).is_err());
    }

    #[test]
    fn non_finite_values_become_null() {
        assert_eq!(finite(f64::INFINITY), Value::Null);
        assert_eq!(finite(1.5), json!(1.5));
    }
}
