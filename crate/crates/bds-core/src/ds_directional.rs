//! Inexact directional direct search with sufficient decrease.
//!
//! Three direction modes: the full signed coordinate basis, a random
//! antipodal unit pair per iteration, and a deterministic dense antipodal
//! pair for nonsmooth objectives. Polling is opportunistic (first success
//! wins, in the fixed direction order) and a successful direction is
//! extrapolated by repeated stepsize expansion while the sufficient-decrease
//! test keeps passing.

use crate::config::{DirectionMode, SolverConfig};
use crate::direction::DirectionSet;
use crate::error::{CarriedBest, Error, Result};
use crate::halton;
use crate::ledger::{decrease_accepted, evaluate_reduced, DecreaseRule, EvalLedger};
use crate::linalg::add_scaled;
use crate::lower_level::{make_oracle, LowerOracle};
use crate::problem::BilevelProblem;
use crate::rng::RngStream;
use crate::trace::{Termination, Trace, TraceRow};

/// Per-iteration solver state.
#[derive(Debug, Clone)]
pub struct DirectionalState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub f_tilde: f64,
    pub alpha: f64,
    pub k: u64,
    pub consecutive_floor_failures: u32,
}

#[derive(Debug, Clone)]
pub enum PollOutcome {
    Success { d: Vec<f64>, x: Vec<f64>, y: Vec<f64>, f_tilde: f64 },
    Failure,
}

/// Optional search step: proposes arbitrary trial points for iteration k.
/// Shipped unused; the experiments run pure poll iterations.
pub type SearchHook<'a> = dyn FnMut(u64, &[f64], f64) -> Vec<Vec<f64>> + 'a;

/// Generates the poll directions for iteration `k`.
pub fn gen_directions(
    mode: DirectionMode,
    n_x: usize,
    k: u64,
    rng: &mut RngStream,
) -> DirectionSet {
    assert!(n_x >= 1);
    match mode {
        DirectionMode::Coordinate => {
            let mut dirs = Vec::with_capacity(2 * n_x);
            for s in [1.0, -1.0] {
                for i in 0..n_x {
                    let mut e = vec![0.0; n_x];
                    e[i] = s;
                    dirs.push(e);
                }
            }
            let kappa = 1.0 / (n_x as f64).sqrt();
            DirectionSet::new(dirs, mode, Some(kappa))
        }
        DirectionMode::Random => {
            let v = rng.unit_vector(n_x);
            let neg = v.iter().map(|c| -c).collect();
            let kappa = if n_x == 1 { Some(1.0) } else { None };
            DirectionSet::new(vec![v, neg], mode, kappa)
        }
        DirectionMode::Dense => {
            let h = halton::sphere_point(n_x, k);
            let neg = h.iter().map(|c| -c).collect();
            let kappa = if n_x == 1 { Some(1.0) } else { None };
            DirectionSet::new(vec![h, neg], mode, kappa)
        }
        DirectionMode::Mesh => unreachable!("mesh directions are generated by the mesh solver"),
    }
}

/// Polls the trial points x + alpha * d in direction order and returns the
/// first one passing the sufficient-decrease test. A non-finite objective
/// value fails that direction (the evaluation still counts); running out of
/// budget mid-poll raises BudgetExhausted.
pub fn poll(
    state: &DirectionalState,
    problem: &BilevelProblem,
    oracle: &mut dyn LowerOracle,
    config: &SolverConfig,
    dirs: &DirectionSet,
    ledger: &mut EvalLedger,
) -> Result<PollOutcome> {
    for d in &dirs.dirs {
        let candidate = add_scaled(&state.x, state.alpha, d);
        match evaluate_reduced(problem, &candidate, oracle, ledger) {
            Ok((y, f)) => {
                if decrease_accepted(f, state.f_tilde, state.alpha, DecreaseRule::Sufficient, config.c)
                {
                    return Ok(PollOutcome::Success { d: d.clone(), x: candidate, y, f_tilde: f });
                }
            }
            Err(Error::NonFiniteValue { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(PollOutcome::Failure)
}

/// Expands a successful poll step: tests x_k + gamma^j alpha_k d for
/// j = 1, 2, ... while each new point passes the sufficient-decrease test
/// against the previously accepted one at stepsize gamma^j alpha_k. Returns
/// the last accepted point and the stepsize gamma^{j*} alpha_k of the last
/// accepted exponent. On budget exhaustion the error carries the best
/// accepted point so the caller can finalize its trace.
#[allow(clippy::too_many_arguments)]
pub fn extrapolate(
    problem: &BilevelProblem,
    oracle: &mut dyn LowerOracle,
    config: &SolverConfig,
    ledger: &mut EvalLedger,
    x_k: &[f64],
    d: &[f64],
    alpha_k: f64,
    poll_success: (Vec<f64>, Vec<f64>, f64),
) -> Result<(Vec<f64>, Vec<f64>, f64, f64)> {
    let (mut best_x, mut best_y, mut best_f) = poll_success;
    let mut alpha_out = alpha_k;
    if config.gamma == 1.0 {
        // expansion would retest the same point; skip
        return Ok((best_x, best_y, best_f, alpha_out));
    }
    let mut j = 1i32;
    loop {
        let step = alpha_k * config.gamma.powi(j);
        let candidate = add_scaled(x_k, step, d);
        match evaluate_reduced(problem, &candidate, oracle, ledger) {
            Ok((y, f)) => {
                if decrease_accepted(f, best_f, step, DecreaseRule::Sufficient, config.c) {
                    best_x = candidate;
                    best_y = y;
                    best_f = f;
                    alpha_out = step;
                    j += 1;
                } else {
                    break;
                }
            }
            Err(Error::NonFiniteValue { .. }) => break,
            Err(Error::BudgetExhausted { .. }) => {
                return Err(Error::BudgetExhausted {
                    carried: Some(CarriedBest {
                        x: best_x,
                        y_tilde: best_y,
                        f_tilde: best_f,
                        alpha: alpha_out,
                    }),
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok((best_x, best_y, best_f, alpha_out))
}

/// Runs the directional solver from `x0` until the budget is spent, the
/// stepsize floor is confirmed by two consecutive unsuccessful iterations,
/// or the iteration cap is hit. Dense mode skips the floor criterion and
/// runs to budget or cap.
pub fn run_directional(
    problem: &BilevelProblem,
    config: &SolverConfig,
    x0: &[f64],
    oracle: &mut dyn LowerOracle,
) -> Result<Trace> {
    run_directional_with_search(problem, config, x0, oracle, None)
}

/// As [`run_directional`] with an optional search step ahead of each poll.
pub fn run_directional_with_search(
    problem: &BilevelProblem,
    config: &SolverConfig,
    x0: &[f64],
    oracle: &mut dyn LowerOracle,
    mut search: Option<&mut SearchHook<'_>>,
) -> Result<Trace> {
    config.validate_directional()?;
    assert_eq!(x0.len(), problem.n_x);
    let mut rng = RngStream::from_seed(config.seed).split("directional");
    let mut ledger = EvalLedger::new(config.budget);

    let (y0, f0) = evaluate_reduced(problem, x0, oracle, &mut ledger)?;
    let mut rows = vec![TraceRow {
        k: 0,
        upper_evals: ledger.upper_evals,
        success: false,
        alpha: config.alpha0,
        f_tilde: f0,
        x: x0.to_vec(),
        mesh: None,
    }];
    let mut state = DirectionalState {
        x: x0.to_vec(),
        y: y0,
        f_tilde: f0,
        alpha: config.alpha0,
        k: 0,
        consecutive_floor_failures: 0,
    };
    // dense polling needs unbounded iterations in theory; it stops on the
    // budget or the cap instead of the floor rule
    let floor_rule = config.direction_mode != DirectionMode::Dense && config.alpha_min > 0.0;

    let termination = loop {
        if state.k >= config.iter_cap {
            break Termination::IterCap;
        }
        if ledger.is_exhausted() {
            break Termination::Budget;
        }

        let mut searched: Option<(Vec<f64>, Vec<f64>, f64)> = None;
        if let Some(hook) = search.as_mut() {
            let trials = hook(state.k, &state.x, state.alpha);
            match run_search_step(problem, oracle, config, &mut ledger, &state, trials) {
                Ok(hit) => searched = hit,
                Err(Error::BudgetExhausted { .. }) => break Termination::Budget,
                Err(e) => return Err(e),
            }
        }
        if let Some((x, y, f)) = searched {
            state.x = x;
            state.y = y;
            state.f_tilde = f;
            state.consecutive_floor_failures = 0;
            let alpha_used = state.alpha;
            state.k += 1;
            rows.push(TraceRow {
                k: state.k,
                upper_evals: ledger.upper_evals,
                success: true,
                alpha: alpha_used,
                f_tilde: state.f_tilde,
                x: state.x.clone(),
                mesh: None,
            });
            continue;
        }

        let dirs = gen_directions(config.direction_mode, problem.n_x, state.k, &mut rng);
        match poll(&state, problem, oracle, config, &dirs, &mut ledger) {
            Ok(PollOutcome::Success { d, x, y, f_tilde }) => {
                state.consecutive_floor_failures = 0;
                let alpha_used = state.alpha;
                let ext = extrapolate(
                    problem,
                    oracle,
                    config,
                    &mut ledger,
                    &state.x,
                    &d,
                    alpha_used,
                    (x, y, f_tilde),
                );
                match ext {
                    Ok((bx, by, bf, alpha_out)) => {
                        state.x = bx;
                        state.y = by;
                        state.f_tilde = bf;
                        state.alpha = alpha_out;
                        state.k += 1;
                        rows.push(TraceRow {
                            k: state.k,
                            upper_evals: ledger.upper_evals,
                            success: true,
                            alpha: alpha_used,
                            f_tilde: state.f_tilde,
                            x: state.x.clone(),
                            mesh: None,
                        });
                    }
                    Err(Error::BudgetExhausted { carried }) => {
                        let best = carried.expect("extrapolate always carries its incumbent");
                        state.x = best.x;
                        state.y = best.y_tilde;
                        state.f_tilde = best.f_tilde;
                        state.k += 1;
                        rows.push(TraceRow {
                            k: state.k,
                            upper_evals: ledger.upper_evals,
                            success: true,
                            alpha: alpha_used,
                            f_tilde: state.f_tilde,
                            x: state.x.clone(),
                            mesh: None,
                        });
                        break Termination::Budget;
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok(PollOutcome::Failure) => {
                let at_floor = config.alpha_min > 0.0 && state.alpha == config.alpha_min;
                let alpha_used = state.alpha;
                if at_floor {
                    state.consecutive_floor_failures += 1;
                } else {
                    state.consecutive_floor_failures = 0;
                }
                state.alpha = (config.theta_f64() * state.alpha).max(config.alpha_min);
                state.k += 1;
                rows.push(TraceRow {
                    k: state.k,
                    upper_evals: ledger.upper_evals,
                    success: false,
                    alpha: alpha_used,
                    f_tilde: state.f_tilde,
                    x: state.x.clone(),
                    mesh: None,
                });
                if floor_rule && state.consecutive_floor_failures >= 2 {
                    break Termination::Floor;
                }
            }
            Err(Error::BudgetExhausted { .. }) => break Termination::Budget,
            Err(e) => return Err(e),
        }
    };

    let trace = Trace {
        problem_id: problem.id.clone(),
        solver_id: format!("{}-ds", config.direction_mode.as_str()),
        seed: config.seed,
        n_x: problem.n_x,
        rows,
        termination,
        upper_evals: ledger.upper_evals,
        lower_oracle_calls: ledger.lower_oracle_calls,
        lower_inner_iters: ledger.lower_inner_iters,
        mesh_audit: None,
    };
    // the sufficient-decrease margin caps the number of successes on every
    // run whose problem card carries the needed constants
    if let Some((successes, bound)) = crate::audit::success_count_bound(&trace, problem, config) {
        assert!(
            (successes as f64) <= bound,
            "{}: {} successful iterations exceed the decrease-margin cap {}",
            problem.id,
            successes,
            bound
        );
    }
    Ok(trace)
}

fn run_search_step(
    problem: &BilevelProblem,
    oracle: &mut dyn LowerOracle,
    config: &SolverConfig,
    ledger: &mut EvalLedger,
    state: &DirectionalState,
    trials: Vec<Vec<f64>>,
) -> Result<Option<(Vec<f64>, Vec<f64>, f64)>> {
    for t in trials {
        match evaluate_reduced(problem, &t, oracle, ledger) {
            Ok((y, f)) => {
                if decrease_accepted(f, state.f_tilde, state.alpha, DecreaseRule::Sufficient, config.c)
                {
                    return Ok(Some((t, y, f)));
                }
            }
            Err(Error::NonFiniteValue { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

/// Convenience wrapper building the configured oracle and running from x0.
pub fn solve_directional(
    problem: &BilevelProblem,
    config: &SolverConfig,
    x0: &[f64],
) -> Result<Trace> {
    let mut oracle = make_oracle(
        problem,
        config.oracle_kind,
        config.eps_oracle,
        config.seed,
        config.g_lb,
    )?;
    run_directional(problem, config, x0, oracle.as_mut())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lower_level::ExactOracle;
    use crate::problem::ProblemMetadata;
    use std::sync::Arc;

    fn p1_like(n: usize) -> BilevelProblem {
        BilevelProblem {
            id: format!("p1-{n}d"),
            n_x: n,
            n_y: n,
            upper: Arc::new(|x, y| {
                x.iter().map(|v| v * v).sum::<f64>() + y.iter().map(|v| v * v).sum::<f64>()
            }),
            lower: Arc::new(|x, z| x.iter().zip(z).map(|(a, b)| (b - a) * (b - a)).sum()),
            lower_grad_y: Arc::new(|x, z| x.iter().zip(z).map(|(a, b)| 2.0 * (b - a)).collect()),
            feasible_box: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
            analytic_lower: Some(Arc::new(|x| x.to_vec())),
            analytic_f_grad: Some(Arc::new(|x| x.iter().map(|v| 4.0 * v).collect())),
            f_star: Some(0.0),
            start_box: vec![(-0.25, 0.25); n],
            oracle_only: false,
            meta: ProblemMetadata {
                l_f: Some(1.0),
                l_grad: Some(4.0),
                l_reduced: None,
                c_g: Some(2.0),
                l_g: Some(2.0),
                f_low: Some(0.0),
                smooth: true,
            },
        }
    }

    fn coord_config() -> SolverConfig {
        SolverConfig::directional_defaults(DirectionMode::Coordinate)
    }

    #[test]
    fn coordinate_directions_r2() {
        let mut rng = RngStream::from_seed(0);
        let set = gen_directions(DirectionMode::Coordinate, 2, 0, &mut rng);
        assert_eq!(
            set.dirs,
            vec![
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![-1.0, 0.0],
                vec![0.0, -1.0]
            ]
        );
        let kappa = set.kappa_hint.unwrap();
        assert!((kappa - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn random_pair_is_antipodal_unit() {
        let mut rng = RngStream::from_seed(5);
        let set = gen_directions(DirectionMode::Random, 3, 0, &mut rng);
        assert_eq!(set.dirs.len(), 2);
        let sum: Vec<f64> = set.dirs[0].iter().zip(&set.dirs[1]).map(|(a, b)| a + b).collect();
        assert!(crate::linalg::norm(&sum) < 1e-12);
        for d in &set.dirs {
            assert!((crate::linalg::norm(d) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_directions_fill_the_circle() {
        // max angular gap of the first 1e4 dense directions in R^2 under 5 degrees
        let mut angles: Vec<f64> = (0..10_000u64)
            .map(|k| {
                let mut rng = RngStream::from_seed(0);
                let v = gen_directions(DirectionMode::Dense, 2, k, &mut rng).dirs[0].clone();
                v[1].atan2(v[0])
            })
            .collect();
        angles.sort_by(f64::total_cmp);
        let mut max_gap: f64 = 0.0;
        for w in angles.windows(2) {
            max_gap = max_gap.max(w[1] - w[0]);
        }
        let wrap = (angles[0] + 2.0 * std::f64::consts::PI) - angles[angles.len() - 1];
        max_gap = max_gap.max(wrap);
        assert!(max_gap < 5.0f64.to_radians(), "max angular gap {max_gap}");
    }

    #[test]
    fn poll_finds_descent_direction() {
        // F = 2 ||x||^2 at x = (1, 0), alpha = 0.5: only -e1 passes
        let p = p1_like(2);
        let cfg = coord_config();
        let mut oracle = ExactOracle;
        let mut ledger = EvalLedger::new(100);
        let state = DirectionalState {
            x: vec![1.0, 0.0],
            y: vec![1.0, 0.0],
            f_tilde: 2.0,
            alpha: 0.5,
            k: 0,
            consecutive_floor_failures: 0,
        };
        let mut rng = RngStream::from_seed(0);
        let dirs = gen_directions(DirectionMode::Coordinate, 2, 0, &mut rng);
        match poll(&state, &p, &mut oracle, &cfg, &dirs, &mut ledger).unwrap() {
            PollOutcome::Success { d, x, f_tilde, .. } => {
                assert_eq!(d, vec![-1.0, 0.0]);
                assert_eq!(x, vec![0.5, 0.0]);
                assert_eq!(f_tilde, 0.5);
            }
            PollOutcome::Failure => panic!("expected a successful poll"),
        }
    }

    #[test]
    fn poll_from_minimizer_fails() {
        let p = p1_like(2);
        let cfg = coord_config();
        let mut oracle = ExactOracle;
        let mut ledger = EvalLedger::new(100);
        let state = DirectionalState {
            x: vec![0.0, 0.0],
            y: vec![0.0, 0.0],
            f_tilde: 0.0,
            alpha: 0.25,
            k: 0,
            consecutive_floor_failures: 0,
        };
        let mut rng = RngStream::from_seed(0);
        let dirs = gen_directions(DirectionMode::Coordinate, 2, 0, &mut rng);
        assert!(matches!(
            poll(&state, &p, &mut oracle, &cfg, &dirs, &mut ledger).unwrap(),
            PollOutcome::Failure
        ));
    }

    #[test]
    fn poll_with_exhausted_budget_errors() {
        let p = p1_like(2);
        let cfg = coord_config();
        let mut oracle = ExactOracle;
        let mut ledger = EvalLedger::new(1);
        evaluate_reduced(&p, &[1.0, 0.0], &mut oracle, &mut ledger).unwrap();
        let state = DirectionalState {
            x: vec![1.0, 0.0],
            y: vec![1.0, 0.0],
            f_tilde: 2.0,
            alpha: 0.5,
            k: 0,
            consecutive_floor_failures: 0,
        };
        let mut rng = RngStream::from_seed(0);
        let dirs = gen_directions(DirectionMode::Coordinate, 2, 0, &mut rng);
        assert!(matches!(
            poll(&state, &p, &mut oracle, &cfg, &dirs, &mut ledger),
            Err(Error::BudgetExhausted { .. })
        ));
    }

    fn quad_1d() -> BilevelProblem {
        // F(x) = x^2 via f = y^2, y(x) = x
        BilevelProblem {
            id: "sq1".into(),
            n_x: 1,
            n_y: 1,
            upper: Arc::new(|_, y| y[0] * y[0]),
            lower: Arc::new(|x, z| (z[0] - x[0]) * (z[0] - x[0])),
            lower_grad_y: Arc::new(|x, z| vec![2.0 * (z[0] - x[0])]),
            feasible_box: vec![(f64::NEG_INFINITY, f64::INFINITY)],
            analytic_lower: Some(Arc::new(|x| x.to_vec())),
            analytic_f_grad: Some(Arc::new(|x| vec![2.0 * x[0]])),
            f_star: Some(0.0),
            start_box: vec![(-2.0, 2.0)],
            oracle_only: false,
            meta: ProblemMetadata {
                l_f: Some(4.0),
                l_grad: Some(2.0),
                l_reduced: None,
                c_g: Some(2.0),
                l_g: Some(2.0),
                f_low: Some(0.0),
                smooth: true,
            },
        }
    }

    #[test]
    fn extrapolation_chain_doubles_until_it_fails() {
        // F(x) = x^2 from x = -2 along d = +1 with alpha = 0.5, gamma = 2:
        // accepts -1.5 (poll), then -1, then 0, rejects 2; alpha_out = 2
        let p = quad_1d();
        let mut cfg = coord_config();
        cfg.gamma = 2.0;
        let mut oracle = ExactOracle;
        let mut ledger = EvalLedger::new(100);
        let x_k = vec![-2.0];
        let (y1, f1) = evaluate_reduced(&p, &[-1.5], &mut oracle, &mut ledger).unwrap();
        let (xb, _, fb, alpha_out) = extrapolate(
            &p,
            &mut oracle,
            &cfg,
            &mut ledger,
            &x_k,
            &[1.0],
            0.5,
            (vec![-1.5], y1, f1),
        )
        .unwrap();
        assert_eq!(xb, vec![0.0]);
        assert_eq!(fb, 0.0);
        assert_eq!(alpha_out, 2.0);
    }

    #[test]
    fn failed_first_extrapolation_keeps_poll_point() {
        // from x = -0.5 along +1 at alpha = 0.5 the poll lands on the
        // minimizer; the doubled step is rejected
        let p = quad_1d();
        let cfg = coord_config();
        let mut oracle = ExactOracle;
        let mut ledger = EvalLedger::new(100);
        let (y1, f1) = evaluate_reduced(&p, &[0.0], &mut oracle, &mut ledger).unwrap();
        let (xb, _, _, alpha_out) = extrapolate(
            &p,
            &mut oracle,
            &cfg,
            &mut ledger,
            &[-0.5],
            &[1.0],
            0.5,
            (vec![0.0], y1, f1),
        )
        .unwrap();
        assert_eq!(xb, vec![0.0]);
        assert_eq!(alpha_out, 0.5);
    }

    #[test]
    fn gamma_one_skips_expansion() {
        let p = quad_1d();
        let mut cfg = coord_config();
        cfg.gamma = 1.0;
        let mut oracle = ExactOracle;
        let mut ledger = EvalLedger::new(100);
        let (y1, f1) = evaluate_reduced(&p, &[0.0], &mut oracle, &mut ledger).unwrap();
        let evals = ledger.upper_evals;
        let (xb, _, _, alpha_out) = extrapolate(
            &p,
            &mut oracle,
            &cfg,
            &mut ledger,
            &[-0.5],
            &[1.0],
            0.5,
            (vec![0.0], y1, f1),
        )
        .unwrap();
        assert_eq!(xb, vec![0.0]);
        assert_eq!(alpha_out, 0.5);
        assert_eq!(ledger.upper_evals, evals);
    }

    #[test]
    fn run_reaches_floor_near_minimizer() {
        let p = p1_like(2);
        let mut cfg = coord_config();
        cfg.seed = 3;
        let mut oracle = ExactOracle;
        let trace = run_directional(&p, &cfg, &[1.0, 1.0], &mut oracle).unwrap();
        assert_eq!(trace.termination, Termination::Floor);
        assert!(crate::linalg::norm(trace.final_x()) <= 1e-4);
        assert!(trace.upper_evals <= cfg.budget);
    }

    #[test]
    fn run_from_minimizer_shrinks_to_floor() {
        let p = p1_like(2);
        let mut cfg = coord_config();
        cfg.alpha_min = 1e-3;
        let mut oracle = ExactOracle;
        let trace = run_directional(&p, &cfg, &[0.0, 0.0], &mut oracle).unwrap();
        assert_eq!(trace.termination, Termination::Floor);
        assert_eq!(trace.final_x(), &[0.0, 0.0]);
        assert_eq!(trace.success_count(), 0);
        // stepsizes shrink geometrically to the floor
        for w in trace.rows.windows(2).skip(1) {
            assert!(w[1].alpha <= w[0].alpha);
        }
    }

    #[test]
    fn monotone_f_with_margin_on_success() {
        let p = p1_like(2);
        let cfg = coord_config();
        let mut oracle = ExactOracle;
        let trace = run_directional(&p, &cfg, &[0.2, -0.15], &mut oracle).unwrap();
        for w in trace.rows.windows(2) {
            let (prev, cur) = (&w[0], &w[1]);
            if cur.success {
                let rho = 0.5 * cfg.c * cur.alpha * cur.alpha;
                assert!(cur.f_tilde < prev.f_tilde - rho);
            } else {
                assert_eq!(cur.f_tilde, prev.f_tilde);
            }
        }
    }

    #[test]
    fn identical_seeds_give_bit_identical_traces() {
        let p = p1_like(2);
        let mut cfg = SolverConfig::directional_defaults(DirectionMode::Random);
        cfg.seed = 11;
        let mut o1 = ExactOracle;
        let mut o2 = ExactOracle;
        let a = run_directional(&p, &cfg, &[0.2, 0.1], &mut o1).unwrap();
        let b = run_directional(&p, &cfg, &[0.2, 0.1], &mut o2).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn budget_exhaustion_terminates_cleanly() {
        let p = p1_like(2);
        let mut cfg = coord_config();
        cfg.budget = 3;
        let mut oracle = ExactOracle;
        let trace = run_directional(&p, &cfg, &[1.0, 1.0], &mut oracle).unwrap();
        assert_eq!(trace.termination, Termination::Budget);
        assert!(trace.upper_evals <= 3);
    }

    #[test]
    fn dense_mode_ignores_floor_and_hits_cap() {
        let p = quad_1d();
        let mut cfg = SolverConfig::directional_defaults(DirectionMode::Dense);
        cfg.iter_cap = 40;
        cfg.budget = 100_000;
        let mut oracle = ExactOracle;
        let trace = run_directional(&p, &cfg, &[0.5], &mut oracle).unwrap();
        assert_eq!(trace.termination, Termination::IterCap);
        assert_eq!(trace.iterations(), 40);
    }
}
