//! Multi-start benchmark harness: runs every (solver, instance, accuracy)
//! cell with its own budget and ledger, scores traces with the shared
//! convergence test, and emits trace CSVs, score tables, profile tables,
//! and SVG figures. Cells are independent jobs executed on a bounded
//! thread pool; all randomness derives from the master seed and the cell
//! identity, so results do not depend on scheduling order.

pub mod profiles;
pub mod suite;
pub mod svg;

pub use profiles::{convergence_eval_count, ProfileTable, StepFn};
pub use suite::{by_id, suite};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{OracleKind, SolverConfig};
use crate::ds_directional::solve_directional;
use crate::ds_mesh::solve_mesh;
use crate::error::{Error, Result};
use crate::problem::BilevelProblem;
use crate::rng::RngStream;
use crate::trace::{Trace, TraceRow};

pub const DEFAULT_SOLVERS: [&str; 3] = ["mesh-ds", "coordinate-ds", "random-ds"];

/// Experiment description; an empty JSON object deserializes to the full
/// default protocol.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub solvers: Vec<String>,
    pub problems: Vec<String>,
    /// Lower-level oracle accuracies; one full pass per value.
    pub lltols: Vec<f64>,
    /// Convergence-test tolerances the profiles are computed at.
    pub conv_tols: Vec<f64>,
    pub starts: usize,
    pub budget: u64,
    pub master_seed: u64,
    pub out_dir: Option<PathBuf>,
    /// Worker threads; defaults to BDS_JOBS or the logical core count.
    pub jobs: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            solvers: DEFAULT_SOLVERS.iter().map(|s| s.to_string()).collect(),
            problems: suite().into_iter().map(|p| p.id).collect(),
            lltols: vec![1e-3, 1e-6],
            conv_tols: vec![1e-3, 1e-6],
            starts: 5,
            budget: 500,
            master_seed: 0,
            out_dir: None,
            jobs: None,
        }
    }
}

/// One starting point of one problem.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub problem_id: String,
    pub start_id: u64,
    pub x0: Vec<f64>,
    pub n_p: usize,
}

/// The starting point of instance (problem, start_id) under a master seed.
/// Depends only on those three, never on the solver list.
pub fn instance_start(master_seed: u64, problem: &BilevelProblem, start_id: u64) -> Vec<f64> {
    let mut rng = RngStream::from_seed(master_seed)
        .split("starts")
        .split(&problem.id)
        .split_indexed("start", start_id);
    rng.in_box(&problem.start_box)
}

/// Base configuration of a named solver at the §-defaults.
pub fn solver_base_config(solver_id: &str) -> Result<SolverConfig> {
    use crate::config::DirectionMode::*;
    match solver_id {
        "coordinate-ds" => Ok(SolverConfig::directional_defaults(Coordinate)),
        "random-ds" => Ok(SolverConfig::directional_defaults(Random)),
        "dense-ds" => Ok(SolverConfig::directional_defaults(Dense)),
        "mesh-ds" => Ok(SolverConfig::mesh_defaults()),
        other => Err(Error::UnknownSolver(other.to_string())),
    }
}

/// Runs a named solver with a ready configuration.
pub fn dispatch_solver(
    solver_id: &str,
    problem: &BilevelProblem,
    config: &SolverConfig,
    x0: &[f64],
) -> Result<Trace> {
    match solver_id {
        "coordinate-ds" | "random-ds" | "dense-ds" => solve_directional(problem, config, x0),
        "mesh-ds" => solve_mesh(problem, config, x0),
        other => Err(Error::UnknownSolver(other.to_string())),
    }
}

pub fn format_tol(v: f64) -> String {
    format!("{v:.0e}")
}

pub fn cell_id(problem: &str, start: u64, solver: &str, lltol: f64) -> String {
    format!("{problem}_{start}_{solver}_{}", format_tol(lltol))
}

/// The exact per-cell configuration used by the experiment; exposed so
/// audits can rebuild it.
pub fn cell_config(
    experiment: &ExperimentConfig,
    solver_id: &str,
    lltol: f64,
    id: &str,
) -> Result<SolverConfig> {
    let mut cfg = solver_base_config(solver_id)?;
    cfg.budget = experiment.budget;
    cfg.eps_oracle = lltol;
    cfg.oracle_kind = OracleKind::Gd;
    cfg.seed = RngStream::from_seed(experiment.master_seed)
        .split("cell")
        .split(id)
        .seed();
    Ok(cfg)
}

/// Result of one benchmark cell. Failed cells keep their error string and
/// score as unsolved.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub cell_id: String,
    pub problem: String,
    pub start: u64,
    pub solver: String,
    pub lltol: f64,
    pub n_x: usize,
    pub trace: Option<Trace>,
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub instances: Vec<ProblemInstance>,
    pub outcomes: Vec<CellOutcome>,
    /// (conv_tol, lltol) -> profile table.
    pub tables: Vec<(f64, f64, ProfileTable)>,
}

impl ExperimentResult {
    pub fn table(&self, conv_tol: f64, lltol: f64) -> Option<&ProfileTable> {
        self.tables
            .iter()
            .find(|(c, l, _)| *c == conv_tol && *l == lltol)
            .map(|(_, _, t)| t)
    }
}

fn worker_threads(cfg: &ExperimentConfig) -> usize {
    cfg.jobs
        .or_else(|| std::env::var("BDS_JOBS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        })
        .max(1)
}

/// Runs the full experiment grid. Per-cell failures are recorded, scored
/// as unsolved, and do not abort the run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let problems: Vec<BilevelProblem> = config
        .problems
        .iter()
        .map(|id| by_id(id))
        .collect::<Result<_>>()?;
    for s in &config.solvers {
        solver_base_config(s)?;
    }
    if config.starts == 0 || config.lltols.is_empty() || config.solvers.is_empty() {
        return Err(Error::InvalidConfig("experiment grid is empty".into()));
    }

    let mut instances = Vec::new();
    for p in &problems {
        for start_id in 0..config.starts as u64 {
            instances.push(ProblemInstance {
                problem_id: p.id.clone(),
                start_id,
                x0: instance_start(config.master_seed, p, start_id),
                n_p: p.n_x,
            });
        }
    }

    struct CellSpec<'a> {
        problem: &'a BilevelProblem,
        instance: &'a ProblemInstance,
        solver: String,
        lltol: f64,
    }
    let mut specs = Vec::new();
    for inst in &instances {
        let problem = problems.iter().find(|p| p.id == inst.problem_id).unwrap();
        for solver in &config.solvers {
            for &lltol in &config.lltols {
                specs.push(CellSpec { problem, instance: inst, solver: solver.clone(), lltol });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_threads(config))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let outcomes: Vec<CellOutcome> = pool.install(|| {
        specs
            .par_iter()
            .map(|spec| {
                let id =
                    cell_id(&spec.problem.id, spec.instance.start_id, &spec.solver, spec.lltol);
                let run = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
                    let cfg = cell_config(config, &spec.solver, spec.lltol, &id)?;
                    dispatch_solver(&spec.solver, spec.problem, &cfg, &spec.instance.x0)
                }));
                let (trace, error) = match run {
                    Ok(Ok(trace)) => (Some(trace), None),
                    Ok(Err(e)) => (None, Some(e.to_string())),
                    Err(panic) => {
                        let msg = panic
                            .downcast_ref::<&str>()
                            .map(|s| s.to_string())
                            .or_else(|| panic.downcast_ref::<String>().cloned())
                            .unwrap_or_else(|| "panic".into());
                        (None, Some(format!("panic: {msg}")))
                    }
                };
                CellOutcome {
                    cell_id: id,
                    problem: spec.problem.id.clone(),
                    start: spec.instance.start_id,
                    solver: spec.solver.clone(),
                    lltol: spec.lltol,
                    n_x: spec.problem.n_x,
                    trace,
                    error,
                }
            })
            .collect()
    });

    let records: Vec<CellRecord> = outcomes.iter().map(CellRecord::from_outcome).collect();
    let tables = build_tables(
        &records,
        &config.solvers,
        &config.problems,
        config.starts as u64,
        &config.conv_tols,
        &config.lltols,
    );
    for (_, _, t) in &tables {
        if let Err(msg) = t.validate_axioms() {
            return Err(Error::InvalidConfig(format!("profile axioms violated: {msg}")));
        }
    }

    let result = ExperimentResult { config: config.clone(), instances, outcomes, tables };
    if let Some(dir) = &result.config.out_dir {
        write_outputs(&result, dir)?;
    }
    Ok(result)
}

/// The data scoring needs from one cell: identity plus the (evals, value)
/// rows. Built either from an in-memory trace or from a persisted CSV.
#[derive(Debug, Clone)]
pub struct CellRecord {
    pub problem: String,
    pub start: u64,
    pub solver: String,
    pub lltol: f64,
    pub n_x: usize,
    pub rows: Vec<TraceRow>,
}

impl CellRecord {
    fn from_outcome(o: &CellOutcome) -> Self {
        CellRecord {
            problem: o.problem.clone(),
            start: o.start,
            solver: o.solver.clone(),
            lltol: o.lltol,
            n_x: o.n_x,
            rows: o.trace.as_ref().map(|t| t.rows.clone()).unwrap_or_default(),
        }
    }
}

/// Scores records and assembles one profile table per
/// (convergence tolerance, oracle accuracy) pair. The best value on each
/// instance is taken across all solvers at the same accuracy before any
/// counting happens.
pub fn build_tables(
    records: &[CellRecord],
    solvers: &[String],
    problem_order: &[String],
    starts: u64,
    conv_tols: &[f64],
    lltols: &[f64],
) -> Vec<(f64, f64, ProfileTable)> {
    let mut tables = Vec::new();
    for &conv_tol in conv_tols {
        for &lltol in lltols {
            let mut labels = Vec::new();
            let mut n_p = Vec::new();
            let mut t: Vec<Vec<Option<u64>>> = Vec::new();
            for problem in problem_order {
                for start in 0..starts {
                    let group: Vec<&CellRecord> = records
                        .iter()
                        .filter(|r| {
                            r.problem == *problem && r.start == start && r.lltol == lltol
                        })
                        .collect();
                    if group.is_empty() {
                        continue;
                    }
                    let f_low_best = group
                        .iter()
                        .flat_map(|r| r.rows.iter().map(|row| row.f_tilde))
                        .fold(f64::INFINITY, f64::min);
                    let row: Vec<Option<u64>> = solvers
                        .iter()
                        .map(|s| {
                            group
                                .iter()
                                .find(|r| r.solver == *s)
                                .and_then(|r| convergence_eval_count(&r.rows, f_low_best, conv_tol))
                        })
                        .collect();
                    labels.push(format!("{problem}_{start}"));
                    n_p.push(group[0].n_x);
                    t.push(row);
                }
            }
            tables.push((
                conv_tol,
                lltol,
                ProfileTable::new(solvers.to_vec(), labels, n_p, t, conv_tol),
            ));
        }
    }
    tables
}

/// Writes the experiment directory: traces/<cell>.csv, table.csv, profile
/// CSVs per convergence tolerance, and the profile figures.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir.join("traces"))?;
    std::fs::create_dir_all(dir.join("figures"))?;

    for o in &result.outcomes {
        if let Some(trace) = &o.trace {
            std::fs::write(dir.join("traces").join(format!("{}.csv", o.cell_id)), trace.to_csv())?;
        }
    }

    // score table
    let suite_stars: BTreeMap<String, Option<f64>> =
        suite().into_iter().map(|p| (p.id.clone(), p.f_star)).collect();
    let mut table = String::from("cell_id,problem,start,solver,lltol");
    for tol in &result.config.conv_tols {
        table.push_str(&format!(",t_evals_{}", format_tol(*tol)));
    }
    table.push_str(",F_best,F_star_gap,termination,error\n");
    for o in &result.outcomes {
        table.push_str(&format!(
            "{},{},{},{},{}",
            o.cell_id,
            o.problem,
            o.start,
            o.solver,
            format_tol(o.lltol)
        ));
        let rows: &[TraceRow] = o.trace.as_ref().map(|t| t.rows.as_slice()).unwrap_or(&[]);
        let group_best = best_on_instance(result, &o.problem, o.start, o.lltol);
        for tol in &result.config.conv_tols {
            match convergence_eval_count(rows, group_best, *tol) {
                Some(t) => table.push_str(&format!(",{t}")),
                None => table.push_str(",inf"),
            }
        }
        let f_best = o.trace.as_ref().map(|t| t.best_f());
        match f_best {
            Some(f) => table.push_str(&format!(",{}", crate::trace::fmt_f64(f))),
            None => table.push_str(","),
        }
        match (f_best, suite_stars.get(&o.problem).copied().flatten()) {
            (Some(f), Some(star)) => table.push_str(&format!(",{}", crate::trace::fmt_f64(f - star))),
            _ => table.push_str(","),
        }
        match &o.trace {
            Some(t) => table.push_str(&format!(",{}", t.termination.as_str())),
            None => table.push_str(","),
        }
        table.push_str(&format!(",{}\n", o.error.clone().unwrap_or_default()));
    }
    std::fs::write(dir.join("table.csv"), table)?;

    // profile tables and figures per convergence tolerance
    for &conv_tol in &result.config.conv_tols {
        let mut perf = String::from("lltol,solver,gamma,rho\n");
        let mut data = String::from("lltol,solver,kappa,d\n");
        let mut panels: Vec<(String, &ProfileTable)> = Vec::new();
        for &lltol in &result.config.lltols {
            let table = result.table(conv_tol, lltol).expect("table exists");
            panels.push((format!("lower-level tol {}", format_tol(lltol)), table));
            for (s, name) in table.solvers.iter().enumerate() {
                for (x, v) in table.rho(s).breakpoints() {
                    perf.push_str(&format!(
                        "{},{},{},{}\n",
                        format_tol(lltol),
                        name,
                        crate::trace::fmt_f64(x),
                        crate::trace::fmt_f64(v)
                    ));
                }
                for (x, v) in table.d(s).breakpoints() {
                    data.push_str(&format!(
                        "{},{},{},{}\n",
                        format_tol(lltol),
                        name,
                        crate::trace::fmt_f64(x),
                        crate::trace::fmt_f64(v)
                    ));
                }
            }
        }
        let tol_tag = format_tol(conv_tol);
        std::fs::write(dir.join(format!("profiles_perf_{tol_tag}.csv")), perf)?;
        std::fs::write(dir.join(format!("profiles_data_{tol_tag}.csv")), data)?;
        std::fs::write(
            dir.join("figures").join(format!("performance_profiles_tol{tol_tag}.svg")),
            svg::profile_figure(&panels, true, &format!("performance profiles, tol {tol_tag}")),
        )?;
        std::fs::write(
            dir.join("figures").join(format!("data_profiles_tol{tol_tag}.svg")),
            svg::profile_figure(&panels, false, &format!("data profiles, tol {tol_tag}")),
        )?;
    }
    Ok(())
}

fn best_on_instance(result: &ExperimentResult, problem: &str, start: u64, lltol: f64) -> f64 {
    result
        .outcomes
        .iter()
        .filter(|o| o.problem == problem && o.start == start && o.lltol == lltol)
        .flat_map(|o| o.trace.as_ref().map(|t| t.best_f()))
        .fold(f64::INFINITY, f64::min)
}

/// Rebuilds the profile tables of a persisted experiment directory from
/// its trace CSVs and table.csv identity columns. Returns tables in the
/// same (conv_tol, lltol) order as `run_experiment`.
pub fn recompute_tables_from_dir(dir: &Path) -> Result<Vec<(f64, f64, ProfileTable)>> {
    let text = std::fs::read_to_string(dir.join("table.csv"))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::MalformedTrace("empty table.csv".into()))?;
    let conv_tols: Vec<f64> = header
        .split(',')
        .filter_map(|c| c.strip_prefix("t_evals_"))
        .map(|s| s.parse().map_err(|_| Error::MalformedTrace(format!("bad tolerance {s:?}"))))
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    let mut solvers: Vec<String> = Vec::new();
    let mut problem_order: Vec<String> = Vec::new();
    let mut lltols: Vec<f64> = Vec::new();
    let mut max_start = 0u64;
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let (id, problem, start, solver, lltol) = (f[0], f[1], f[2], f[3], f[4]);
        let start: u64 = start
            .parse()
            .map_err(|_| Error::MalformedTrace(format!("bad start {start:?}")))?;
        let lltol: f64 = lltol
            .parse()
            .map_err(|_| Error::MalformedTrace(format!("bad lltol {lltol:?}")))?;
        if !solvers.contains(&solver.to_string()) {
            solvers.push(solver.to_string());
        }
        if !problem_order.contains(&problem.to_string()) {
            problem_order.push(problem.to_string());
        }
        if !lltols.contains(&lltol) {
            lltols.push(lltol);
        }
        max_start = max_start.max(start);
        let trace_path = dir.join("traces").join(format!("{id}.csv"));
        let (rows, n_x) = if trace_path.exists() {
            let parsed = Trace::parse_csv(&std::fs::read_to_string(trace_path)?)?;
            (parsed.rows, parsed.n_x)
        } else {
            (Vec::new(), by_id(problem)?.n_x)
        };
        records.push(CellRecord {
            problem: problem.to_string(),
            start,
            solver: solver.to_string(),
            lltol,
            n_x,
            rows,
        });
    }
    Ok(build_tables(&records, &solvers, &problem_order, max_start + 1, &conv_tols, &lltols))
}
