//! Convergence scoring and data/performance profiles.

use crate::trace::TraceRow;

/// Evaluation count at which a trace first satisfies the convergence test
/// F(x_k) <= F_low_best + tol (F(x_0) - F_low_best), where F_low_best is
/// the best value achieved by any solver on the instance. `None` means the
/// trace never meets the test.
pub fn convergence_eval_count(rows: &[TraceRow], f_low_best: f64, tol: f64) -> Option<u64> {
    let f0 = rows.first()?.f_tilde;
    let threshold = f_low_best + tol * (f0 - f_low_best);
    rows.iter().find(|r| r.f_tilde <= threshold).map(|r| r.upper_evals)
}

/// A right-continuous nondecreasing step function given by the sorted
/// abscissas at which it jumps by 1/denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFn {
    /// Jump locations, sorted ascending.
    pub jumps: Vec<f64>,
    /// Number of instances the fractions are relative to.
    pub denominator: usize,
}

impl StepFn {
    pub fn eval(&self, x: f64) -> f64 {
        if self.denominator == 0 {
            return 0.0;
        }
        let count = self.jumps.iter().take_while(|j| **j <= x).count();
        count as f64 / self.denominator as f64
    }

    /// Limit value as the argument grows without bound.
    pub fn limit(&self) -> f64 {
        if self.denominator == 0 {
            return 0.0;
        }
        self.jumps.len() as f64 / self.denominator as f64
    }

    /// (abscissa, value) pairs after each jump, for serialization.
    pub fn breakpoints(&self) -> Vec<(f64, f64)> {
        self.jumps
            .iter()
            .enumerate()
            .map(|(i, j)| (*j, (i + 1) as f64 / self.denominator as f64))
            .collect()
    }
}

/// Evaluation counts t_{p,s} over instances p and solvers s, with the
/// derived performance profile rho_s(gamma) and data profile d_s(kappa).
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    pub solvers: Vec<String>,
    /// Kept instance labels (instances solved by at least one solver).
    pub instances: Vec<String>,
    /// Problem dimension per kept instance.
    pub n_p: Vec<usize>,
    /// t[instance][solver]; None encodes an unsolved cell.
    pub t: Vec<Vec<Option<u64>>>,
    /// Convergence tolerance the counts were scored at.
    pub tol: f64,
    /// Instances no solver solved, dropped from the table.
    pub dropped: Vec<String>,
}

impl ProfileTable {
    /// Builds a table, dropping (and reporting) instances without a single
    /// finite count.
    pub fn new(
        solvers: Vec<String>,
        instances: Vec<String>,
        n_p: Vec<usize>,
        t: Vec<Vec<Option<u64>>>,
        tol: f64,
    ) -> Self {
        assert_eq!(instances.len(), t.len());
        assert_eq!(instances.len(), n_p.len());
        let mut kept_instances = Vec::new();
        let mut kept_np = Vec::new();
        let mut kept_t = Vec::new();
        let mut dropped = Vec::new();
        for ((label, np), row) in instances.into_iter().zip(n_p).zip(t) {
            assert_eq!(row.len(), solvers.len());
            if row.iter().any(|c| c.is_some()) {
                kept_instances.push(label);
                kept_np.push(np);
                kept_t.push(row);
            } else {
                dropped.push(label);
            }
        }
        ProfileTable {
            solvers,
            instances: kept_instances,
            n_p: kept_np,
            t: kept_t,
            tol,
            dropped,
        }
    }

    pub fn instance_count(&self) -> usize {
        self.instances.len()
    }

    fn best_per_instance(&self) -> Vec<u64> {
        self.t
            .iter()
            .map(|row| row.iter().flatten().min().copied().expect("kept instances have a min"))
            .collect()
    }

    /// Performance profile of one solver: the fraction of instances whose
    /// evaluation-count ratio against the instance-best solver is at most
    /// gamma.
    pub fn rho(&self, solver: usize) -> StepFn {
        let best = self.best_per_instance();
        let mut jumps: Vec<f64> = self
            .t
            .iter()
            .zip(&best)
            .filter_map(|(row, b)| row[solver].map(|t| t as f64 / *b as f64))
            .collect();
        jumps.sort_by(f64::total_cmp);
        StepFn { jumps, denominator: self.instance_count() }
    }

    /// Data profile of one solver: the fraction of instances solved within
    /// kappa groups of n_p + 1 evaluations.
    pub fn d(&self, solver: usize) -> StepFn {
        let mut jumps: Vec<f64> = self
            .t
            .iter()
            .zip(&self.n_p)
            .filter_map(|(row, np)| row[solver].map(|t| t as f64 / (*np as f64 + 1.0)))
            .collect();
        jumps.sort_by(f64::total_cmp);
        StepFn { jumps, denominator: self.instance_count() }
    }

    /// Structural profile properties: monotonicity, limits, and the
    /// presence of a ratio-1 solver on every kept instance.
    pub fn validate_axioms(&self) -> Result<(), String> {
        if self.instance_count() == 0 {
            return Ok(());
        }
        let best = self.best_per_instance();
        for (i, (row, b)) in self.t.iter().zip(&best).enumerate() {
            if !row.iter().flatten().any(|t| t == b) {
                return Err(format!("instance {} has no ratio-1 solver", self.instances[i]));
            }
        }
        for s in 0..self.solvers.len() {
            for f in [self.rho(s), self.d(s)] {
                for w in f.jumps.windows(2) {
                    if w[1] < w[0] {
                        return Err(format!("solver {} has unsorted jumps", self.solvers[s]));
                    }
                }
                let solved = self.t.iter().filter(|row| row[s].is_some()).count();
                let expect = solved as f64 / self.instance_count() as f64;
                if (f.limit() - expect).abs() > 1e-12 {
                    return Err(format!(
                        "solver {} limit {} differs from solved fraction {}",
                        self.solvers[s],
                        f.limit(),
                        expect
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(k: u64, evals: u64, f: f64) -> TraceRow {
        TraceRow {
            k,
            upper_evals: evals,
            success: false,
            alpha: 1.0,
            f_tilde: f,
            x: vec![0.0],
            mesh: None,
        }
    }

    #[test]
    fn convergence_count_finds_first_crossing() {
        let rows = vec![row(0, 1, 10.0), row(1, 3, 0.5), row(2, 5, 0.005)];
        // threshold = 0 + 1e-3 * 10 = 0.01
        assert_eq!(convergence_eval_count(&rows, 0.0, 1e-3), Some(5));
    }

    #[test]
    fn convergence_count_none_when_never_crossing() {
        let rows = vec![row(0, 1, 10.0), row(1, 3, 5.0)];
        assert_eq!(convergence_eval_count(&rows, 0.0, 1e-3), None);
    }

    #[test]
    fn degenerate_instance_is_solved_at_row_zero() {
        let rows = vec![row(0, 1, 3.0), row(1, 2, 2.9)];
        // F(x0) = F_low_best: threshold equals both
        assert_eq!(convergence_eval_count(&rows, 3.0, 1e-3), Some(1));
    }

    fn two_solver_table(t: Vec<Vec<Option<u64>>>) -> ProfileTable {
        let n = t.len();
        ProfileTable::new(
            vec!["a".into(), "b".into()],
            (0..n).map(|i| format!("inst{i}")).collect(),
            vec![1; n],
            t,
            1e-3,
        )
    }

    #[test]
    fn perf_profile_ratios() {
        let table = two_solver_table(vec![vec![Some(2), Some(4)]]);
        let rho_a = table.rho(0);
        let rho_b = table.rho(1);
        assert_eq!(rho_a.eval(1.0), 1.0);
        assert_eq!(rho_b.eval(1.0), 0.0);
        assert_eq!(rho_b.eval(2.0), 1.0);
        table.validate_axioms().unwrap();
    }

    #[test]
    fn unsolved_cells_never_count() {
        let table = two_solver_table(vec![vec![Some(2), None]]);
        let rho_b = table.rho(1);
        assert_eq!(rho_b.eval(1e9), 0.0);
        let d_b = table.d(1);
        assert_eq!(d_b.eval(1e9), 0.0);
        table.validate_axioms().unwrap();
    }

    #[test]
    fn data_profile_counts_groups_of_np_plus_one() {
        // n_p = 1, t = 2: solved for kappa >= 1
        let table = two_solver_table(vec![vec![Some(2), Some(6)]]);
        let d_a = table.d(0);
        assert_eq!(d_a.eval(0.99), 0.0);
        assert_eq!(d_a.eval(1.0), 1.0);
    }

    #[test]
    fn instances_unsolved_by_everyone_are_dropped() {
        let table = two_solver_table(vec![vec![None, None], vec![Some(3), Some(3)]]);
        assert_eq!(table.instance_count(), 1);
        assert_eq!(table.dropped, vec!["inst0".to_string()]);
        table.validate_axioms().unwrap();
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn profiles_are_monotone_and_bounded(
                raw in proptest::collection::vec(
                    proptest::collection::vec(proptest::option::of(1u64..1000), 3),
                    1..12
                )
            ) {
                let table = ProfileTable::new(
                    vec!["s0".into(), "s1".into(), "s2".into()],
                    (0..raw.len()).map(|i| format!("i{i}")).collect(),
                    vec![2; raw.len()],
                    raw,
                    1e-3,
                );
                prop_assert!(table.validate_axioms().is_ok());
                for s in 0..3 {
                    let f = table.rho(s);
                    let mut last = 0.0;
                    for gamma in [1.0, 1.5, 2.0, 4.0, 16.0, 1e6] {
                        let v = f.eval(gamma);
                        prop_assert!(v >= last && v <= 1.0);
                        last = v;
                    }
                }
            }
        }
    }
}
