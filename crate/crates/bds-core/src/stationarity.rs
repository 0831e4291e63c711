//! A-posteriori certification of solver output.
//!
//! Two flavors: closed-form gradient-norm bounds at a stepsize floor for
//! smooth objectives, and sampled Goldstein-stationarity certificates for
//! nonsmooth ones. The Goldstein check samples (sub)gradients in a ball
//! around the candidate point and exhibits a small-norm element of their
//! convex hull via a min-norm-point computation; it can certify membership
//! but never refute it, so a failed check is reported as inconclusive.

use serde::Serialize;

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::ledger::EvalLedger;
use crate::linalg::{self, dot, norm};
use crate::lower_level::LowerOracle;
use crate::problem::{BilevelProblem, ProblemMetadata};
use crate::rng::RngStream;

/// Gradient-norm bound at a stepsize floor for smooth objectives:
/// (1/kappa) * ((l + c) b2 alpha_min / 2 + 2 l_f eps / (b1 alpha_min)).
/// With c = 0 this is the mesh-frame version; with b1 = b2 = 1 the
/// directional one.
pub fn smooth_gradient_bound(
    alpha_min: f64,
    eps: f64,
    c: f64,
    l: f64,
    l_f: f64,
    kappa: f64,
    b1: f64,
    b2: f64,
) -> f64 {
    assert!(alpha_min > 0.0 && kappa > 0.0 && b1 > 0.0 && b2 > 0.0);
    ((l + c) * b2 * alpha_min / 2.0 + 2.0 * l_f * eps / (b1 * alpha_min)) / kappa
}

/// As [`smooth_gradient_bound`], reading the constants from a solver config
/// and problem metadata. Fails fast when a needed constant is unknown.
pub fn smooth_bound(
    config: &SolverConfig,
    meta: &ProblemMetadata,
    kappa: f64,
    b1: f64,
    b2: f64,
) -> Result<f64> {
    let l = meta.l_grad.ok_or(Error::MissingMetadata("l_grad"))?;
    let l_f = meta.l_f.ok_or(Error::MissingMetadata("l_f"))?;
    if !(config.alpha_min > 0.0) {
        return Err(Error::InvalidConfig("smooth bound needs alpha_min > 0".into()));
    }
    Ok(smooth_gradient_bound(
        config.alpha_min,
        config.eps_oracle,
        config.c,
        l,
        l_f,
        kappa,
        b1,
        b2,
    ))
}

/// Goldstein target for the directional solver at a floor alpha_min:
/// epsilon = 4 l_f eps / alpha_min + c alpha_min, delta = alpha_min.
pub fn directional_goldstein_target(l_f: f64, eps: f64, alpha_min: f64, c: f64) -> (f64, f64) {
    (alpha_min, 4.0 * l_f * eps / alpha_min + c * alpha_min)
}

/// Goldstein target for the mesh solver: epsilon = 4 l_f eps / alpha_min,
/// delta = alpha_min.
pub fn mesh_goldstein_target(l_f: f64, eps: f64, alpha_min: f64) -> (f64, f64) {
    (alpha_min, 4.0 * l_f * eps / alpha_min)
}

/// Balanced floor for the directional solver, alpha_min = 2 sqrt(l_f eps / c),
/// and the (delta, epsilon) target it induces: delta = 2 sqrt(l_f eps / c),
/// epsilon = 4 sqrt(l_f eps c).
pub fn balanced_directional_target(l_f: f64, eps: f64, c: f64) -> (f64, f64) {
    let delta = 2.0 * (l_f * eps / c).sqrt();
    let epsilon = 4.0 * (l_f * eps * c).sqrt();
    (delta, epsilon)
}

/// Min-norm point of the convex hull of the given vectors.
///
/// Pairwise Frank-Wolfe with exact line search on ||sum w_i g_i||^2 over the
/// simplex, run until the Frank-Wolfe gap certifies the squared norm within
/// 1e-10 of optimal. Returns the hull point and its simplex weights.
pub fn min_norm_point(gradients: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    if gradients.is_empty() {
        return Err(Error::EmptyInput);
    }
    let m = gradients.len();
    assert!(gradients.iter().all(|g| linalg::all_finite(g)));
    let mut w = vec![1.0 / m as f64; m];
    let combine = |w: &[f64]| -> Vec<f64> {
        let n = gradients[0].len();
        let mut p = vec![0.0; n];
        for (wi, g) in w.iter().zip(gradients) {
            for (pc, gc) in p.iter_mut().zip(g) {
                *pc += wi * gc;
            }
        }
        p
    };
    const GAP_TOL: f64 = 1e-10;
    for _ in 0..100_000 {
        let p = combine(&w);
        // phi(w) = ||p||^2, d phi / d w_i = 2 <g_i, p>
        let scores: Vec<f64> = gradients.iter().map(|g| dot(g, &p)).collect();
        let s = (0..m)
            .min_by(|a, b| scores[*a].total_cmp(&scores[*b]))
            .unwrap();
        let a = (0..m)
            .filter(|i| w[*i] > 0.0)
            .max_by(|x, y| scores[*x].total_cmp(&scores[*y]))
            .unwrap();
        let fw_gap = 2.0 * (dot(&p, &p) - scores[s]);
        if fw_gap <= GAP_TOL {
            break;
        }
        // move weight from the worst active vertex to the best vertex
        let dvec = linalg::sub(&gradients[s], &gradients[a]);
        let denom = dot(&dvec, &dvec);
        if denom <= 0.0 {
            break;
        }
        let t = (-dot(&p, &dvec) / denom).clamp(0.0, w[a]);
        if t == 0.0 {
            break;
        }
        w[s] += t;
        w[a] -= t;
    }
    // clean tiny negatives from float accumulation and renormalize
    let mut total = 0.0;
    for wi in &mut w {
        if *wi < 0.0 {
            *wi = 0.0;
        }
        total += *wi;
    }
    for wi in &mut w {
        *wi /= total;
    }
    let p = combine(&w);
    Ok((p, w))
}

/// How sample gradients are obtained for the Goldstein check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradSource {
    /// Use the problem's analytic (sub)gradient selection of the reduced
    /// objective.
    AnalyticSubgrad,
    /// Central differences of the exact reduced objective; needs the
    /// analytic lower solution.
    FiniteDifference,
}

/// Result of a sampled Goldstein-stationarity check.
#[derive(Debug, Clone, Serialize)]
pub struct GoldsteinCertificate {
    pub x: Vec<f64>,
    pub delta: f64,
    pub epsilon_target: f64,
    /// Convex combination of sampled (sub)gradients at points within
    /// distance delta of x.
    pub witness_g: Vec<f64>,
    pub witness_norm: f64,
    pub samples_used: usize,
    pub weights: Vec<f64>,
    /// True certifies stationarity up to sampling and finite-difference
    /// error; false is inconclusive, never a refutation.
    pub passed: bool,
    pub seed: u64,
}

/// Central-difference gradient with stencil width h per coordinate.
pub fn central_diff_grad<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = Vec::with_capacity(x.len());
    let mut z = x.to_vec();
    for i in 0..x.len() {
        let xi = x[i];
        z[i] = xi + h;
        let fp = f(&z);
        z[i] = xi - h;
        let fm = f(&z);
        z[i] = xi;
        g.push((fp - fm) / (2.0 * h));
    }
    g
}

/// Finite-difference stencil width used by the Goldstein check.
pub fn fd_step(x: &[f64]) -> f64 {
    1e-6 * norm(x).max(1.0)
}

/// Samples `n_samples` points uniformly in the ball of radius delta - h
/// around x (so difference stencils stay inside the delta-ball), collects
/// their (sub)gradients, and exhibits the min-norm element of the sampled
/// hull.
pub fn goldstein_certify(
    problem: &BilevelProblem,
    x: &[f64],
    delta: f64,
    epsilon_target: f64,
    n_samples: usize,
    rng: &mut RngStream,
    grad_source: GradSource,
) -> Result<GoldsteinCertificate> {
    if n_samples == 0 {
        return Err(Error::EmptyInput);
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidConfig("delta must be positive".into()));
    }
    let h = fd_step(x);
    if delta <= h {
        return Err(Error::InvalidConfig(format!(
            "delta ({delta}) must exceed the finite-difference step ({h})"
        )));
    }
    let radius = delta - h;
    let gradients: Vec<Vec<f64>> = match grad_source {
        GradSource::AnalyticSubgrad => {
            let g = problem
                .analytic_f_grad
                .as_ref()
                .ok_or(Error::MissingMetadata("analytic_f_grad"))?;
            (0..n_samples).map(|_| g(&rng.in_ball(x, radius))).collect()
        }
        GradSource::FiniteDifference => {
            if problem.analytic_lower.is_none() {
                return Err(Error::MissingAnalyticLower);
            }
            let f = |z: &[f64]| problem.reduced_exact(z).expect("analytic lower present");
            (0..n_samples)
                .map(|_| central_diff_grad(f, &rng.in_ball(x, radius), h))
                .collect()
        }
    };
    let (witness_g, weights) = min_norm_point(&gradients)?;
    let witness_norm = norm(&witness_g);
    Ok(GoldsteinCertificate {
        x: x.to_vec(),
        delta,
        epsilon_target,
        witness_g,
        witness_norm,
        samples_used: n_samples,
        weights,
        passed: witness_norm <= epsilon_target,
        seed: rng.seed(),
    })
}

/// Runs the smooth-bound checks a floor-terminated directional trace is
/// expected to satisfy; returns the bound for logging.
pub fn certify_floor_gradient(
    problem: &BilevelProblem,
    config: &SolverConfig,
    kappa: f64,
    x_final: &[f64],
) -> Result<(f64, f64)> {
    let g = problem
        .analytic_f_grad
        .as_ref()
        .ok_or(Error::MissingMetadata("analytic_f_grad"))?;
    let bound = smooth_bound(config, &problem.meta, kappa, 1.0, 1.0)?;
    Ok((norm(&g(x_final)), bound))
}

/// Evaluates the reduced objective through an oracle for use as a black-box
/// function in external certification flows.
pub fn oracle_reduced_fn<'a>(
    problem: &'a BilevelProblem,
    oracle: &'a mut dyn LowerOracle,
    ledger: &'a mut EvalLedger,
) -> impl FnMut(&[f64]) -> Result<f64> + 'a {
    move |z: &[f64]| crate::ledger::evaluate_reduced(problem, z, oracle, ledger).map(|(_, f)| f)
}
