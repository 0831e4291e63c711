//! Bilevel problem model.
//!
//! A problem bundles the upper objective f(x, y), the lower objective
//! g(x, z) with its y-gradient, the lower feasible box, and regularity
//! metadata. Test problems additionally carry the analytic lower solution
//! y(x), the analytic gradient of the reduced objective F(x) = f(x, y(x)),
//! and the optimal value, which certification and scoring use.

use std::sync::Arc;

use crate::linalg;

pub type UpperFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type LowerFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type LowerGradFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
pub type MapFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Regularity constants. `None` means unknown; operations that need a
/// constant fail fast instead of guessing. Constants may be valid only on a
/// documented region of the problem (see the suite problem cards); they are
/// still usable by every bound that only visits that region.
#[derive(Debug, Clone, Default)]
pub struct ProblemMetadata {
    /// Lipschitz constant of f with respect to y.
    pub l_f: Option<f64>,
    /// Lipschitz constant of the gradient of the reduced objective.
    pub l_grad: Option<f64>,
    /// Lipschitz constant of the reduced objective itself.
    pub l_reduced: Option<f64>,
    /// Error-bound constant of the lower level: c_g * ||y - y(x)|| bounds
    /// the lower gradient norm from below.
    pub c_g: Option<f64>,
    /// Lipschitz constant of the lower-level gradient in y.
    pub l_g: Option<f64>,
    /// Lower bound on f.
    pub f_low: Option<f64>,
    /// Whether the reduced objective is continuously differentiable with
    /// Lipschitz gradient (on the documented region).
    pub smooth: bool,
}

impl ProblemMetadata {
    fn check_nonneg(v: Option<f64>, name: &'static str) {
        if let Some(c) = v {
            assert!(c.is_finite() && c >= 0.0, "metadata {name} must be nonnegative");
        }
    }

    pub fn validate(&self) {
        Self::check_nonneg(self.l_f, "l_f");
        Self::check_nonneg(self.l_grad, "l_grad");
        Self::check_nonneg(self.l_reduced, "l_reduced");
        Self::check_nonneg(self.c_g, "c_g");
        Self::check_nonneg(self.l_g, "l_g");
        if let Some(c) = self.c_g {
            assert!(c > 0.0, "c_g must be positive when known");
        }
        if let Some(c) = self.l_g {
            assert!(c > 0.0, "l_g must be positive when known");
        }
    }
}

/// A bilevel problem: minimize f(x, y) subject to y solving the lower-level
/// problem min_z g(x, z) over the feasible box.
#[derive(Clone)]
pub struct BilevelProblem {
    pub id: String,
    pub n_x: usize,
    pub n_y: usize,
    pub upper: UpperFn,
    pub lower: LowerFn,
    pub lower_grad_y: LowerGradFn,
    /// Per-coordinate bounds on the lower variable; infinities allowed.
    pub feasible_box: Vec<(f64, f64)>,
    /// Exact lower-level solution, present on test problems.
    pub analytic_lower: Option<MapFn>,
    /// Gradient (or an a.e. gradient selection) of the reduced objective.
    pub analytic_f_grad: Option<MapFn>,
    /// Optimal reduced value, for scoring and diagnostics.
    pub f_star: Option<f64>,
    /// Box the benchmark draws starting points from.
    pub start_box: Vec<(f64, f64)>,
    /// When set, solvers must go through the inexact oracle even at
    /// eps_oracle = 0; the analytic solution is reserved for scoring.
    pub oracle_only: bool,
    pub meta: ProblemMetadata,
}

impl std::fmt::Debug for BilevelProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BilevelProblem")
            .field("id", &self.id)
            .field("n_x", &self.n_x)
            .field("n_y", &self.n_y)
            .field("f_star", &self.f_star)
            .field("oracle_only", &self.oracle_only)
            .finish()
    }
}

impl BilevelProblem {
    pub fn upper_value(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.upper)(x, y)
    }

    pub fn lower_value(&self, x: &[f64], z: &[f64]) -> f64 {
        (self.lower)(x, z)
    }

    pub fn lower_grad(&self, x: &[f64], z: &[f64]) -> Vec<f64> {
        (self.lower_grad_y)(x, z)
    }

    /// Exact lower solution; errors when the problem does not provide one.
    pub fn analytic_lower_at(&self, x: &[f64]) -> crate::error::Result<Vec<f64>> {
        self.analytic_lower
            .as_ref()
            .map(|f| f(x))
            .ok_or(crate::error::Error::MissingAnalyticLower)
    }

    /// Exact reduced objective F(x) = f(x, y(x)); needs the analytic lower
    /// solution.
    pub fn reduced_exact(&self, x: &[f64]) -> crate::error::Result<f64> {
        let y = self.analytic_lower_at(x)?;
        Ok(self.upper_value(x, &y))
    }

    /// Projection of z onto the lower feasible box.
    pub fn project_lower(&self, z: &[f64]) -> Vec<f64> {
        linalg::clamp_box(z, &self.feasible_box)
    }

    /// Midpoint of the feasible box where finite, 0 otherwise; always lies
    /// inside the box. Default oracle start.
    pub fn box_midpoint(&self) -> Vec<f64> {
        self.feasible_box
            .iter()
            .map(|(lo, hi)| {
                if lo.is_finite() && hi.is_finite() {
                    0.5 * (lo + hi)
                } else {
                    0.0f64.clamp(*lo, *hi)
                }
            })
            .collect()
    }

    pub fn validate(&self) {
        assert!(self.n_x >= 1 && self.n_y >= 1);
        assert_eq!(self.feasible_box.len(), self.n_y);
        assert_eq!(self.start_box.len(), self.n_x);
        for (lo, hi) in &self.feasible_box {
            assert!(lo <= hi, "feasible box lower bound above upper bound");
        }
        self.meta.validate();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> BilevelProblem {
        BilevelProblem {
            id: "toy".into(),
            n_x: 1,
            n_y: 1,
            upper: Arc::new(|x, y| x[0] * x[0] + y[0] * y[0]),
            lower: Arc::new(|x, z| (z[0] - x[0]) * (z[0] - x[0])),
            lower_grad_y: Arc::new(|x, z| vec![2.0 * (z[0] - x[0])]),
            feasible_box: vec![(f64::NEG_INFINITY, f64::INFINITY)],
            analytic_lower: Some(Arc::new(|x| x.to_vec())),
            analytic_f_grad: Some(Arc::new(|x| vec![4.0 * x[0]])),
            f_star: Some(0.0),
            start_box: vec![(-1.0, 1.0)],
            oracle_only: false,
            meta: ProblemMetadata {
                l_f: Some(1.0),
                l_grad: Some(4.0),
                l_reduced: Some(4.0),
                c_g: Some(2.0),
                l_g: Some(2.0),
                f_low: Some(0.0),
                smooth: true,
            },
        }
    }

    #[test]
    fn deterministic_evaluation() {
        let p = toy();
        let x = [0.3];
        let y = [0.7];
        let a = p.upper_value(&x, &y);
        let b = p.upper_value(&x, &y);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn reduced_exact_matches_composition() {
        let p = toy();
        assert_eq!(p.reduced_exact(&[0.5]).unwrap(), 0.5);
    }

    #[test]
    fn midpoint_of_unbounded_box_is_origin() {
        let p = toy();
        assert_eq!(p.box_midpoint(), vec![0.0]);
    }
}
