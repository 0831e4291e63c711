//! Reduced-objective evaluation with caching and budget accounting.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg;
use crate::lower_level::LowerOracle;
use crate::problem::BilevelProblem;

/// Cache key: the exact bit pattern of x. No tolerance matching, so mesh
/// revisits are detected exactly and distinct points never collide.
fn bit_key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

/// Counters and cache for one solver run.
#[derive(Debug)]
pub struct EvalLedger {
    pub upper_evals: u64,
    pub lower_oracle_calls: u64,
    pub lower_inner_iters: u64,
    pub budget: u64,
    cache: HashMap<Vec<u64>, (Vec<f64>, f64)>,
}

impl EvalLedger {
    pub fn new(budget: u64) -> Self {
        assert!(budget > 0, "budget must be positive");
        EvalLedger {
            upper_evals: 0,
            lower_oracle_calls: 0,
            lower_inner_iters: 0,
            budget,
            cache: HashMap::new(),
        }
    }

    pub fn remaining(&self) -> u64 {
        self.budget - self.upper_evals
    }

    pub fn is_exhausted(&self) -> bool {
        self.upper_evals >= self.budget
    }

    pub fn cached(&self, x: &[f64]) -> Option<&(Vec<f64>, f64)> {
        self.cache.get(&bit_key(x))
    }
}

/// Evaluates the reduced objective at x through the oracle: one oracle call
/// and one upper evaluation per distinct x, cached thereafter. Cache hits
/// cost nothing. Errors with BudgetExhausted once the budget is spent, and
/// with NonFiniteValue when the upper objective returns NaN or infinity
/// (the offending value is cached so revisits stay consistent).
pub fn evaluate_reduced(
    problem: &BilevelProblem,
    x: &[f64],
    oracle: &mut dyn LowerOracle,
    ledger: &mut EvalLedger,
) -> Result<(Vec<f64>, f64)> {
    if ledger.is_exhausted() {
        return Err(Error::budget());
    }
    if !linalg::all_finite(x) {
        return Err(Error::NonFiniteValue { context: "poll point", x: x.to_vec() });
    }
    let key = bit_key(x);
    if let Some((y, f)) = ledger.cache.get(&key) {
        if !f.is_finite() {
            return Err(Error::NonFiniteValue { context: "upper objective (cached)", x: x.to_vec() });
        }
        return Ok((y.clone(), *f));
    }
    let report = oracle.solve(problem, x)?;
    ledger.lower_oracle_calls += 1;
    ledger.lower_inner_iters += report.inner_iters;
    let f = problem.upper_value(x, &report.y_tilde);
    ledger.upper_evals += 1;
    ledger.cache.insert(key, (report.y_tilde.clone(), f));
    if !f.is_finite() {
        return Err(Error::NonFiniteValue { context: "upper objective", x: x.to_vec() });
    }
    if let Some(f_low) = problem.meta.f_low {
        assert!(
            f >= f_low,
            "observed f = {f} below the declared lower bound {f_low} on {}",
            problem.id
        );
    }
    Ok((report.y_tilde, f))
}

/// Decrease condition used to accept a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecreaseRule {
    /// rho(t) = c/2 * t^2.
    Sufficient,
    /// rho(t) = 0; any strict decrease is enough.
    Simple,
}

/// Forcing term rho(alpha) for the given rule.
pub fn forcing(rule: DecreaseRule, c: f64, alpha: f64) -> f64 {
    match rule {
        DecreaseRule::Sufficient => 0.5 * c * alpha * alpha,
        DecreaseRule::Simple => 0.0,
    }
}

/// Strict decrease test: accept iff F_candidate < F_incumbent - rho(alpha).
/// Ties always reject.
pub fn decrease_accepted(
    f_candidate: f64,
    f_incumbent: f64,
    alpha: f64,
    rule: DecreaseRule,
    c: f64,
) -> bool {
    debug_assert!(alpha > 0.0);
    f_candidate < f_incumbent - forcing(rule, c, alpha)
}
