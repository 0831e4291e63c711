//! Checks of solver traces against the guarantees the algorithms carry.
//!
//! These run after (or over) a finished trace: monotone decrease with the
//! right margin, the cap on successful iterations, the closed-form
//! iteration bound, and the per-iteration gradient bound that every
//! unsuccessful iteration of a smooth run must satisfy. The benchmark
//! harness and the acceptance suite assert zero violations.

use crate::config::SolverConfig;
use crate::linalg::norm;
use crate::problem::BilevelProblem;
use crate::trace::Trace;

/// Tally of a per-iteration bound check.
#[derive(Debug, Clone, Default)]
pub struct BoundCheck {
    pub checked: u64,
    pub violations: u64,
    /// Largest observed LHS/RHS ratio; below 1 everywhere means the bound
    /// holds with that much margin.
    pub worst_ratio: f64,
}

impl BoundCheck {
    fn record(&mut self, lhs: f64, rhs: f64) {
        self.checked += 1;
        let ratio = lhs / rhs;
        if ratio > self.worst_ratio {
            self.worst_ratio = ratio;
        }
        if lhs > rhs {
            self.violations += 1;
        }
    }
}

/// Counts rows violating monotone decrease: F must strictly decrease with
/// margin c/2 alpha^2 (directional) or strictly (mesh) on success and stay
/// constant otherwise.
pub fn monotone_violations(trace: &Trace, c: f64) -> u64 {
    let mesh = trace.is_mesh();
    let mut bad = 0;
    for w in trace.rows.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        let ok = if cur.success {
            let margin = if mesh { 0.0 } else { 0.5 * c * cur.alpha * cur.alpha };
            cur.f_tilde < prev.f_tilde - margin
        } else {
            cur.f_tilde == prev.f_tilde
        };
        if !ok {
            bad += 1;
        }
    }
    bad
}

/// Cap on successful iterations for sufficient-decrease runs with a
/// positive floor: 2 (F(x0) - f_low + 2 l_f eps) / (c alpha_min^2).
/// Returns (successes, bound); None when the needed constants are missing
/// or the floor is disabled.
pub fn success_count_bound(
    trace: &Trace,
    problem: &BilevelProblem,
    config: &SolverConfig,
) -> Option<(u64, f64)> {
    if config.alpha_min <= 0.0 {
        return None;
    }
    let f_low = problem.meta.f_low?;
    let l_f = problem.meta.l_f?;
    let f0 = trace.rows.first()?.f_tilde;
    let bound = 2.0 * (f0 - f_low + 2.0 * l_f * config.eps_oracle)
        / (config.c * config.alpha_min * config.alpha_min);
    Some((trace.success_count(), bound))
}

/// Closed-form iteration bound for directional runs with a positive floor:
/// 1 + (2/(alpha_min^2 c)) (F(x0) - f_low + 2 l_f eps)(1 - ln gamma / ln theta)
///   + (ln alpha_min - ln alpha0) / ln theta.
pub fn iteration_count_bound(
    trace: &Trace,
    problem: &BilevelProblem,
    config: &SolverConfig,
) -> Option<(u64, f64)> {
    if config.alpha_min <= 0.0 {
        return None;
    }
    let f_low = problem.meta.f_low?;
    let l_f = problem.meta.l_f?;
    let f0 = trace.rows.first()?.f_tilde;
    let ln_theta = config.theta_f64().ln();
    let bound = 1.0
        + 2.0 / (config.alpha_min * config.alpha_min * config.c)
            * (f0 - f_low + 2.0 * l_f * config.eps_oracle)
            * (1.0 - config.gamma.ln() / ln_theta)
        + (config.alpha_min.ln() - config.alpha0.ln()) / ln_theta;
    Some((trace.iterations(), bound))
}

/// Per-iteration gradient bound at unsuccessful iterations of smooth runs.
///
/// Directional coordinate mode (kappa = 1/sqrt(n) exactly):
///   ||grad F(x_k)|| <= (1/kappa) ((l + c) alpha_k / 2 + 2 l_f eps / alpha_k).
/// Mesh mode, with the realized per-iteration direction quality:
///   ||grad F(x_k)|| <= (1/kappa_k) (b2 Delta_k l / 2 + 2 l_f eps / (b1 Delta_k)).
///
/// Skips traces whose problem is not smooth or lacks the needed constants;
/// random and dense antipodal pairs are not positive spanning sets, so no
/// bound applies to them.
pub fn unsuccessful_gradient_check(
    trace: &Trace,
    problem: &BilevelProblem,
    config: &SolverConfig,
) -> Option<BoundCheck> {
    if !problem.meta.smooth {
        return None;
    }
    let grad_fn = problem.analytic_f_grad.as_ref()?;
    let l = problem.meta.l_grad?;
    let l_f = problem.meta.l_f?;
    let eps = config.eps_oracle;
    let mut out = BoundCheck::default();
    match trace.solver_id.as_str() {
        "coordinate-ds" => {
            let kappa = 1.0 / (problem.n_x as f64).sqrt();
            for row in trace.rows.iter().skip(1) {
                if row.success {
                    continue;
                }
                let lhs = norm(&grad_fn(&row.x));
                let rhs =
                    ((l + config.c) * row.alpha / 2.0 + 2.0 * l_f * eps / row.alpha) / kappa;
                out.record(lhs, rhs);
            }
        }
        "mesh-ds" => {
            if !config.smooth_mesh {
                return None;
            }
            for row in trace.rows.iter().skip(1) {
                if row.success {
                    continue;
                }
                let m = row.mesh.as_ref()?;
                if !(m.kappa_realized > 0.0 && m.b1 > 0.0) {
                    return None;
                }
                let lhs = norm(&grad_fn(&row.x));
                let rhs = (m.b2 * m.delta * l / 2.0 + 2.0 * l_f * eps / (m.b1 * m.delta))
                    / m.kappa_realized;
                out.record(lhs, rhs);
            }
        }
        _ => return None,
    }
    Some(out)
}

/// Mesh residence over a finished mesh run: every poll point must have
/// landed on the current mesh, with the exactly-computed residual within
/// tolerance.
pub fn mesh_residence_ok(trace: &Trace, tol: f64) -> Option<bool> {
    let audit = trace.mesh_audit.as_ref()?;
    Some(audit.points_checked == audit.points_on_mesh && audit.max_residual <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DirectionMode;
    use crate::ds_directional::run_directional;
    use crate::lower_level::ExactOracle;
    use crate::problem::ProblemMetadata;
    use std::sync::Arc;

    fn p1_like() -> BilevelProblem {
        BilevelProblem {
            id: "p1-like".into(),
            n_x: 2,
            n_y: 2,
            upper: Arc::new(|x, y| {
                x.iter().map(|v| v * v).sum::<f64>() + y.iter().map(|v| v * v).sum::<f64>()
            }),
            lower: Arc::new(|x, z| x.iter().zip(z).map(|(a, b)| (b - a) * (b - a)).sum()),
            lower_grad_y: Arc::new(|x, z| x.iter().zip(z).map(|(a, b)| 2.0 * (b - a)).collect()),
            feasible_box: vec![(f64::NEG_INFINITY, f64::INFINITY); 2],
            analytic_lower: Some(Arc::new(|x| x.to_vec())),
            analytic_f_grad: Some(Arc::new(|x| x.iter().map(|v| 4.0 * v).collect())),
            f_star: Some(0.0),
            start_box: vec![(-0.25, 0.25); 2],
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

    #[test]
    fn clean_run_passes_all_audits() {
        let p = p1_like();
        let cfg = SolverConfig::directional_defaults(DirectionMode::Coordinate);
        let mut oracle = ExactOracle;
        let trace = run_directional(&p, &cfg, &[0.2, -0.1], &mut oracle).unwrap();
        assert_eq!(monotone_violations(&trace, cfg.c), 0);
        let (succ, bound) = success_count_bound(&trace, &p, &cfg).unwrap();
        assert!((succ as f64) <= bound);
        let (iters, ibound) = iteration_count_bound(&trace, &p, &cfg).unwrap();
        assert!((iters as f64) < ibound);
        let check = unsuccessful_gradient_check(&trace, &p, &cfg).unwrap();
        assert!(check.checked > 0);
        assert_eq!(check.violations, 0, "worst ratio {}", check.worst_ratio);
    }

    #[test]
    fn nonsmooth_problems_are_skipped() {
        let mut p = p1_like();
        p.meta.smooth = false;
        let cfg = SolverConfig::directional_defaults(DirectionMode::Coordinate);
        let mut oracle = ExactOracle;
        let trace = run_directional(&p, &cfg, &[0.2, -0.1], &mut oracle).unwrap();
        assert!(unsuccessful_gradient_check(&trace, &p, &cfg).is_none());
    }

    #[test]
    fn random_mode_is_excluded_from_gradient_checks() {
        let p = p1_like();
        let cfg = SolverConfig::directional_defaults(DirectionMode::Random);
        let mut oracle = ExactOracle;
        let trace = run_directional(&p, &cfg, &[0.2, -0.1], &mut oracle).unwrap();
        assert!(unsuccessful_gradient_check(&trace, &p, &cfg).is_none());
    }
}
