//! Command-line frontend: list problems, run a single solve, run the
//! benchmark experiment, recompute profiles, certify stationarity.
//!
//! Exit codes: 0 clean termination (including a stepsize-floor stop),
//! 1 error, 2 budget exhausted, 3 inconclusive certification.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use bds_core::bench::{self, by_id, instance_start, solver_base_config, suite};
use bds_core::rng::RngStream;
use bds_core::stationarity::{goldstein_certify, GradSource};
use bds_core::trace::{Termination, Trace};
use bds_core::{Error, SolverConfig};

#[derive(Parser)]
#[command(
    name = "bds",
    version,
    about = "Direct-search solvers for bilevel optimization with inexact lower-level oracles"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// List the benchmark problems.
    List,
    /// Run one solver on one problem and write a trace CSV plus a JSON
    /// summary.
    Run {
        #[arg(long)]
        problem: Option<String>,
        /// mesh-ds | coordinate-ds | random-ds | dense-ds
        #[arg(long)]
        solver: Option<String>,
        /// Starting point: comma-separated floats or "start:<k>".
        #[arg(long, default_value = "start:0")]
        x0: String,
        /// Lower-level oracle accuracy.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Trace output path; the summary lands next to it.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Config override key=value; repeatable. Unknown keys are
        /// rejected.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Replay a previous run from its summary JSON.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Run the benchmark experiment described by a JSON config ({} for the
    /// default protocol).
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory; overrides the config's out_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify (delta, epsilon)-Goldstein stationarity of a trace's final
    /// iterate.
    Certify {
        #[arg(long)]
        trace: PathBuf,
        /// Problem id; defaults to the trace's summary sidecar.
        #[arg(long)]
        problem: Option<String>,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// fd | analytic
        #[arg(long, default_value = "fd")]
        grad: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::List => cmd_list(),
        Cmd::Run { problem, solver, x0, eps, budget, seed, out, set, spec } => {
            cmd_run(problem, solver, x0, eps, budget, seed, out, set, spec)
        }
        Cmd::Bench { config, out } => cmd_bench(config, out),
        Cmd::Certify { trace, problem, delta, epsilon, samples, seed, grad, out } => {
            cmd_certify(trace, problem, delta, epsilon, samples, seed, grad, out)
        }
    };
    ExitCode::from(code)
}

fn cmd_list() -> u8 {
    println!(
        "{:<6} {:>4} {:>4} {:>7} {:>12}",
        "id", "n_x", "n_y", "smooth", "F*"
    );
    for p in suite() {
        let fstar = p
            .f_star
            .map(|v| format!("{v}"))
            .unwrap_or_else(|| "unknown".into());
        println!(
            "{:<6} {:>4} {:>4} {:>7} {:>12}",
            p.id, p.n_x, p.n_y, p.meta.smooth, fstar
        );
    }
    0
}

#[derive(serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSpec {
    problem: String,
    solver: String,
    x0: Vec<f64>,
    config: SolverConfig,
}

#[derive(serde::Deserialize)]
struct RunSummaryFile {
    run_spec: RunSpec,
}

fn fail(msg: impl std::fmt::Display) -> u8 {
    eprintln!("error: {msg}");
    1
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    problem: Option<String>,
    solver: Option<String>,
    x0_arg: String,
    eps: Option<f64>,
    budget: Option<u64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    set: Vec<String>,
    spec_path: Option<PathBuf>,
) -> u8 {
    let spec = if let Some(path) = spec_path {
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) => return fail(format!("cannot read {}: {e}", path.display())),
        };
        match serde_json::from_str::<RunSummaryFile>(&text) {
            Ok(s) => s.run_spec,
            Err(e) => return fail(format!("bad run summary {}: {e}", path.display())),
        }
    } else {
        let problem_id = match problem {
            Some(p) => p,
            None => return fail("--problem is required (or use --spec)"),
        };
        let solver_id = match solver {
            Some(s) => s,
            None => return fail("--solver is required (or use --spec)"),
        };
        let prob = match by_id(&problem_id) {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        let mut config = match solver_base_config(&solver_id) {
            Ok(c) => c,
            Err(e) => return fail(e),
        };
        if let Some(v) = eps {
            config.eps_oracle = v;
        }
        if let Some(v) = budget {
            config.budget = v;
        }
        if let Some(v) = seed {
            config.seed = v;
        }
        for kv in &set {
            let Some((k, v)) = kv.split_once('=') else {
                return fail(format!("--set expects key=value, got {kv:?}"));
            };
            if let Err(e) = config.set_field(k.trim(), v.trim()) {
                return fail(e);
            }
        }
        let x0 = match resolve_x0(&x0_arg, &prob, config.seed) {
            Ok(v) => v,
            Err(e) => return fail(e),
        };
        RunSpec { problem: problem_id, solver: solver_id, x0, config }
    };

    let prob = match by_id(&spec.problem) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    if spec.x0.len() != prob.n_x {
        return fail(format!(
            "x0 has {} coordinates but {} has n_x = {}",
            spec.x0.len(),
            prob.id,
            prob.n_x
        ));
    }
    let trace = match bench::dispatch_solver(&spec.solver, &prob, &spec.config, &spec.x0) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };

    let out_path = out.unwrap_or_else(|| {
        PathBuf::from(format!("bds_{}_{}.csv", spec.problem, spec.solver))
    });
    if let Some(dir) = out_path.parent() {
        if !dir.as_os_str().is_empty() {
            if let Err(e) = std::fs::create_dir_all(dir) {
                return fail(e);
            }
        }
    }
    if let Err(e) = std::fs::write(&out_path, trace.to_csv()) {
        return fail(e);
    }
    let summary = json!({
        "run_spec": spec,
        "result": {
            "termination": trace.termination.as_str(),
            "final_x": trace.final_x(),
            "final_f_tilde": trace.final_row().f_tilde,
            "best_f": trace.best_f(),
            "iterations": trace.iterations(),
            "success_count": trace.success_count(),
            "upper_evals": trace.upper_evals,
            "lower_oracle_calls": trace.lower_oracle_calls,
            "lower_inner_iters": trace.lower_inner_iters,
            "seed": trace.seed,
        },
        "trace_path": out_path,
    });
    let summary_path = summary_path_for(&out_path);
    if let Err(e) = std::fs::write(&summary_path, serde_json::to_string_pretty(&summary).unwrap())
    {
        return fail(e);
    }
    println!(
        "{}: termination={} F={} evals={} trace={} summary={}",
        spec.problem,
        trace.termination.as_str(),
        trace.final_row().f_tilde,
        trace.upper_evals,
        out_path.display(),
        summary_path.display()
    );
    match trace.termination {
        Termination::Budget => 2,
        _ => 0,
    }
}

fn summary_path_for(trace_path: &Path) -> PathBuf {
    trace_path.with_extension("summary.json")
}

fn resolve_x0(
    arg: &str,
    problem: &bds_core::BilevelProblem,
    seed: u64,
) -> Result<Vec<f64>, String> {
    if let Some(k) = arg.strip_prefix("start:") {
        let k: u64 = k.parse().map_err(|_| format!("bad start index {k:?}"))?;
        return Ok(instance_start(seed, problem, k));
    }
    let coords: Result<Vec<f64>, _> = arg.split(',').map(|c| c.trim().parse::<f64>()).collect();
    coords.map_err(|_| format!("cannot parse x0 {arg:?} (use floats or start:<k>)"))
}

fn cmd_bench(config_path: Option<PathBuf>, out: Option<PathBuf>) -> u8 {
    let mut config: bench::ExperimentConfig = match &config_path {
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => return fail(format!("cannot read {}: {e}", path.display())),
            };
            match serde_json::from_str(&text) {
                Ok(c) => c,
                Err(e) => return fail(format!("bad experiment config: {e}")),
            }
        }
        None => bench::ExperimentConfig::default(),
    };
    if let Some(dir) = out {
        config.out_dir = Some(dir);
    }
    if config.out_dir.is_none() {
        config.out_dir = Some(PathBuf::from("bds_experiment"));
    }
    let result = match bench::run_experiment(&config) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let failed: Vec<&bench::CellOutcome> =
        result.outcomes.iter().filter(|o| o.error.is_some()).collect();
    for f in &failed {
        eprintln!("cell {} failed: {}", f.cell_id, f.error.as_deref().unwrap_or(""));
    }
    println!(
        "ran {} cells ({} failed), wrote {}",
        result.outcomes.len(),
        failed.len(),
        config.out_dir.as_ref().unwrap().display()
    );
    if failed.len() == result.outcomes.len() {
        return 1;
    }
    0
}

#[allow(clippy::too_many_arguments)]
fn cmd_certify(
    trace_path: PathBuf,
    problem: Option<String>,
    delta: f64,
    epsilon: f64,
    samples: usize,
    seed: u64,
    grad: String,
    out: Option<PathBuf>,
) -> u8 {
    let text = match std::fs::read_to_string(&trace_path) {
        Ok(t) => t,
        Err(e) => return fail(format!("cannot read {}: {e}", trace_path.display())),
    };
    let parsed = match Trace::parse_csv(&text) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let problem_id = match problem.or_else(|| sidecar_problem(&trace_path)) {
        Some(p) => p,
        None => {
            return fail(
                "cannot determine the trace's problem: pass --problem or keep the run summary \
                 next to the trace",
            )
        }
    };
    let prob = match by_id(&problem_id) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let grad_source = match grad.as_str() {
        "fd" => GradSource::FiniteDifference,
        "analytic" => GradSource::AnalyticSubgrad,
        other => return fail(format!("unknown gradient source {other:?} (fd | analytic)")),
    };
    let x_final = &parsed.rows.last().expect("nonempty trace").x;
    let mut rng = RngStream::from_seed(seed).split("certify");
    let cert = match goldstein_certify(&prob, x_final, delta, epsilon, samples, &mut rng, grad_source)
    {
        Ok(c) => c,
        Err(Error::EmptyInput) => return fail("samples must be positive"),
        Err(e) => return fail(e),
    };
    let out_path = out.unwrap_or_else(|| trace_path.with_extension("cert.json"));
    if let Err(e) = std::fs::write(&out_path, serde_json::to_string_pretty(&cert).unwrap()) {
        return fail(e);
    }
    println!(
        "{problem_id}: witness_norm={} target={} passed={} certificate={}",
        cert.witness_norm,
        cert.epsilon_target,
        cert.passed,
        out_path.display()
    );
    if cert.passed {
        0
    } else {
        3
    }
}

fn sidecar_problem(trace_path: &Path) -> Option<String> {
    let text = std::fs::read_to_string(summary_path_for(trace_path)).ok()?;
    let summary: RunSummaryFile = serde_json::from_str(&text).ok()?;
    Some(summary.run_spec.problem)
}
