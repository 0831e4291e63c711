//! Synthetic bilevel problem suite with analytic lower-level solutions.
//!
//! Every problem carries its exact lower solution, the reduced objective's
//! gradient (or an a.e. selection), the optimal value, and regularity
//! constants. Constants marked "region" in the card comments are valid on
//! the stated neighborhood of the reachable set; start boxes are chosen so
//! runs stay well inside. All problems have nonnegative objectives with
//! f_low = 0, which also serves as the default lower estimate for the
//! gradient-descent oracle cap.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::problem::{BilevelProblem, ProblemMetadata};

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum()
}

fn mat_vec2(a: &[[f64; 2]; 2], x: &[f64]) -> Vec<f64> {
    vec![
        a[0][0] * x[0] + a[0][1] * x[1],
        a[1][0] * x[0] + a[1][1] * x[1],
    ]
}

/// P1: separable quadratic at both levels. f = ||x||^2 + ||y||^2,
/// g = ||z - x||^2, y(x) = x, F(x) = 2 ||x||^2, minimizer 0.
/// l_grad = 4 exactly; l_f = 1 on ||y|| <= 1/2 (trajectories from the
/// start box stay inside).
fn p1() -> BilevelProblem {
    BilevelProblem {
        id: "P1".into(),
        n_x: 2,
        n_y: 2,
        upper: Arc::new(|x, y| sum_sq(x) + sum_sq(y)),
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
            l_reduced: Some(4.0),
            c_g: Some(2.0),
            l_g: Some(2.0),
            f_low: Some(0.0),
            smooth: true,
        },
    }
}

/// P2: ill-conditioned rotated variant of P1. The lower solution is
/// y(x) = A x with cond(A) = 100 (A symmetric, rotated by 30 degrees), and
/// the lower objective is anisotropic so the gradient-descent oracle does
/// real work: g = (z - Ax)' B (z - Ax) with B = diag(1, 25).
/// Hessian of F is 2I + 2A'A with eigenvalues {2.02, 202}: l_grad = 202.
/// l_f = 16 on ||y|| <= 8.
fn p2() -> BilevelProblem {
    let (c, s) = ((std::f64::consts::PI / 6.0).cos(), (std::f64::consts::PI / 6.0).sin());
    // A = R diag(0.1, 10) R', symmetric with eigenvalues {0.1, 10}
    let a = [
        [c * c * 0.1 + s * s * 10.0, c * s * (0.1 - 10.0)],
        [c * s * (0.1 - 10.0), s * s * 0.1 + c * c * 10.0],
    ];
    // A'A = R diag(0.01, 100) R'
    let ata = [
        [c * c * 0.01 + s * s * 100.0, c * s * (0.01 - 100.0)],
        [c * s * (0.01 - 100.0), s * s * 0.01 + c * c * 100.0],
    ];
    let b = [1.0, 25.0];
    let a1 = a;
    let a2 = a;
    let a3 = a;
    BilevelProblem {
        id: "P2".into(),
        n_x: 2,
        n_y: 2,
        upper: Arc::new(|x, y| sum_sq(x) + sum_sq(y)),
        lower: Arc::new(move |x, z| {
            let ax = mat_vec2(&a1, x);
            z.iter()
                .zip(&ax)
                .zip(b)
                .map(|((zi, axi), bi)| bi * (zi - axi) * (zi - axi))
                .sum()
        }),
        lower_grad_y: Arc::new(move |x, z| {
            let ax = mat_vec2(&a2, x);
            z.iter()
                .zip(&ax)
                .zip(b)
                .map(|((zi, axi), bi)| 2.0 * bi * (zi - axi))
                .collect()
        }),
        feasible_box: vec![(f64::NEG_INFINITY, f64::INFINITY); 2],
        analytic_lower: Some(Arc::new(move |x| mat_vec2(&a3, x))),
        analytic_f_grad: Some(Arc::new(move |x| {
            let atax = mat_vec2(&ata, x);
            x.iter().zip(&atax).map(|(xi, ai)| 2.0 * xi + 2.0 * ai).collect()
        })),
        f_star: Some(0.0),
        start_box: vec![(-0.04, 0.04); 2],
        oracle_only: false,
        meta: ProblemMetadata {
            l_f: Some(16.0),
            l_grad: Some(202.0),
            l_reduced: None,
            c_g: Some(2.0),
            l_g: Some(50.0),
            f_low: Some(0.0),
            smooth: true,
        },
    }
}

/// P3: nonsmooth upper level. f = ||x||_1 + ||y - a||^2 with a = (1, 1),
/// g = ||z - x||^2, so F(x) = ||x||_1 + ||x - a||^2. Coordinatewise
/// soft-thresholding gives x*_i = max(a_i - 1/2, 0) = 1/2 and F* = 3/2.
/// l_f = 8 on ||y - a|| <= 4.
fn p3() -> BilevelProblem {
    let a = [1.0, 1.0];
    BilevelProblem {
        id: "P3".into(),
        n_x: 2,
        n_y: 2,
        upper: Arc::new(move |x, y| {
            x.iter().map(|v| v.abs()).sum::<f64>()
                + y.iter().zip(a).map(|(yi, ai)| (yi - ai) * (yi - ai)).sum::<f64>()
        }),
        lower: Arc::new(|x, z| x.iter().zip(z).map(|(xi, zi)| (zi - xi) * (zi - xi)).sum()),
        lower_grad_y: Arc::new(|x, z| x.iter().zip(z).map(|(xi, zi)| 2.0 * (zi - xi)).collect()),
        feasible_box: vec![(f64::NEG_INFINITY, f64::INFINITY); 2],
        analytic_lower: Some(Arc::new(|x| x.to_vec())),
        // a.e. subgradient selection: sign(0) taken as 0
        analytic_f_grad: Some(Arc::new(move |x| {
            x.iter()
                .zip(a)
                .map(|(xi, ai)| {
                    let s = if *xi > 0.0 {
                        1.0
                    } else if *xi < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    s + 2.0 * (xi - ai)
                })
                .collect()
        })),
        f_star: Some(1.5),
        start_box: vec![(-1.0, 1.0); 2],
        oracle_only: false,
        meta: ProblemMetadata {
            l_f: Some(8.0),
            l_grad: None,
            l_reduced: Some(16.0),
            c_g: Some(2.0),
            l_g: Some(2.0),
            f_low: Some(0.0),
            smooth: false,
        },
    }
}

/// P4: Rosenbrock upper level with a quadratic lower level. The coupling
/// term ||y - x||^2 vanishes at the exact lower solution, so
/// F(x) = (1 - x_1)^2 + 100 (x_2 - x_1^2)^2 with minimizer (1, 1).
/// l_f = 1 on ||y - x|| <= 1/2 (oracle errors keep y within eps of x);
/// l_grad = 8e6 on |x_1| <= 60, |x_2| <= 3600, far beyond anything a
/// trajectory from the start box reaches.
fn p4() -> BilevelProblem {
    BilevelProblem {
        id: "P4".into(),
        n_x: 2,
        n_y: 2,
        upper: Arc::new(|x, y| {
            let ros = (1.0 - x[0]) * (1.0 - x[0])
                + 100.0 * (x[1] - x[0] * x[0]) * (x[1] - x[0] * x[0]);
            ros + x.iter().zip(y).map(|(xi, yi)| (yi - xi) * (yi - xi)).sum::<f64>()
        }),
        lower: Arc::new(|x, z| x.iter().zip(z).map(|(xi, zi)| (zi - xi) * (zi - xi)).sum()),
        lower_grad_y: Arc::new(|x, z| x.iter().zip(z).map(|(xi, zi)| 2.0 * (zi - xi)).collect()),
        feasible_box: vec![(f64::NEG_INFINITY, f64::INFINITY); 2],
        analytic_lower: Some(Arc::new(|x| x.to_vec())),
        analytic_f_grad: Some(Arc::new(|x| {
            let t = x[1] - x[0] * x[0];
            vec![-2.0 * (1.0 - x[0]) - 400.0 * x[0] * t, 200.0 * t]
        })),
        f_star: Some(0.0),
        start_box: vec![(-1.2, 1.2); 2],
        oracle_only: false,
        meta: ProblemMetadata {
            l_f: Some(1.0),
            l_grad: Some(8e6),
            l_reduced: None,
            c_g: Some(2.0),
            l_g: Some(2.0),
            f_low: Some(0.0),
            smooth: true,
        },
    }
}

/// P5: box-constrained lower level with interior solution. Same data as P1
/// but Z = [-1, 1]^2, so y(x) = clamp(x, Z). Starts keep x interior, where
/// the problem coincides with P1; across the box boundary F is only
/// piecewise smooth, so the smooth flag stays off and gradient-bound checks
/// skip this problem.
fn p5() -> BilevelProblem {
    let clamp1 = |v: f64| v.clamp(-1.0, 1.0);
    BilevelProblem {
        id: "P5".into(),
        n_x: 2,
        n_y: 2,
        upper: Arc::new(|x, y| sum_sq(x) + sum_sq(y)),
        lower: Arc::new(|x, z| x.iter().zip(z).map(|(xi, zi)| (zi - xi) * (zi - xi)).sum()),
        lower_grad_y: Arc::new(|x, z| x.iter().zip(z).map(|(xi, zi)| 2.0 * (zi - xi)).collect()),
        feasible_box: vec![(-1.0, 1.0); 2],
        analytic_lower: Some(Arc::new(move |x| x.iter().map(|v| clamp1(*v)).collect())),
        analytic_f_grad: Some(Arc::new(move |x| {
            x.iter()
                .map(|xi| 2.0 * xi + if xi.abs() < 1.0 { 2.0 * xi } else { 0.0 })
                .collect()
        })),
        f_star: Some(0.0),
        start_box: vec![(-0.3, 0.3); 2],
        oracle_only: false,
        meta: ProblemMetadata {
            l_f: Some(1.0),
            l_grad: None,
            l_reduced: None,
            c_g: Some(2.0),
            l_g: Some(2.0),
            f_low: Some(0.0),
            smooth: false,
        },
    }
}

/// P6: one-dimensional pedagogic problem for hand-checkable traces.
/// F(x) = 2 x^2 through f = x^2 + y^2, y(x) = x.
fn p6() -> BilevelProblem {
    BilevelProblem {
        id: "P6".into(),
        n_x: 1,
        n_y: 1,
        upper: Arc::new(|x, y| x[0] * x[0] + y[0] * y[0]),
        lower: Arc::new(|x, z| (z[0] - x[0]) * (z[0] - x[0])),
        lower_grad_y: Arc::new(|x, z| vec![2.0 * (z[0] - x[0])]),
        feasible_box: vec![(f64::NEG_INFINITY, f64::INFINITY)],
        analytic_lower: Some(Arc::new(|x| x.to_vec())),
        analytic_f_grad: Some(Arc::new(|x| vec![4.0 * x[0]])),
        f_star: Some(0.0),
        start_box: vec![(-0.25, 0.25)],
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

/// P7: six-dimensional problem exposed to solvers only through the inexact
/// oracle; the analytic solution y(x) = A x (A = I + 0.1 N, N the upper
/// shift) is reserved for scoring. Anisotropic lower level
/// g = (z - Ax)' B (z - Ax), B = diag(1, 1.5, ..., 3.5).
/// l_grad = 4.42 >= 2 + 2 ||A||^2 globally; l_f = 4 on ||y|| <= 2.
fn p7() -> BilevelProblem {
    let n = 6usize;
    let b: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * i as f64).collect();
    let apply_a = move |x: &[f64]| -> Vec<f64> {
        (0..x.len())
            .map(|i| x[i] + if i + 1 < x.len() { 0.1 * x[i + 1] } else { 0.0 })
            .collect()
    };
    // A'(w): transpose of the shift structure
    let apply_at = move |w: &[f64]| -> Vec<f64> {
        (0..w.len())
            .map(|i| w[i] + if i >= 1 { 0.1 * w[i - 1] } else { 0.0 })
            .collect()
    };
    let b1 = b.clone();
    let b2 = b.clone();
    BilevelProblem {
        id: "P7".into(),
        n_x: n,
        n_y: n,
        upper: Arc::new(|x, y| sum_sq(x) + sum_sq(y)),
        lower: Arc::new(move |x, z| {
            let ax = apply_a(x);
            z.iter()
                .zip(&ax)
                .zip(&b1)
                .map(|((zi, axi), bi)| bi * (zi - axi) * (zi - axi))
                .sum()
        }),
        lower_grad_y: Arc::new(move |x, z| {
            let ax = apply_a(x);
            z.iter()
                .zip(&ax)
                .zip(&b2)
                .map(|((zi, axi), bi)| 2.0 * bi * (zi - axi))
                .collect()
        }),
        feasible_box: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
        analytic_lower: Some(Arc::new(move |x| apply_a(x))),
        analytic_f_grad: Some(Arc::new(move |x| {
            let ax = apply_a(x);
            let at_ax = apply_at(&ax);
            x.iter().zip(&at_ax).map(|(xi, ai)| 2.0 * xi + 2.0 * ai).collect()
        })),
        f_star: Some(0.0),
        start_box: vec![(-0.2, 0.2); n],
        oracle_only: true,
        meta: ProblemMetadata {
            l_f: Some(4.0),
            l_grad: Some(4.42),
            l_reduced: None,
            c_g: Some(2.0),
            l_g: Some(7.0),
            f_low: Some(0.0),
            smooth: true,
        },
    }
}

/// P8: piecewise-linear upper level for Goldstein stationarity tests.
/// f = |y|, y(x) = x, so F(x) = |x| with its kink at the minimizer.
/// l_f = 1 globally.
fn p8() -> BilevelProblem {
    BilevelProblem {
        id: "P8".into(),
        n_x: 1,
        n_y: 1,
        upper: Arc::new(|_, y| y[0].abs()),
        lower: Arc::new(|x, z| (z[0] - x[0]) * (z[0] - x[0])),
        lower_grad_y: Arc::new(|x, z| vec![2.0 * (z[0] - x[0])]),
        feasible_box: vec![(f64::NEG_INFINITY, f64::INFINITY)],
        analytic_lower: Some(Arc::new(|x| x.to_vec())),
        analytic_f_grad: Some(Arc::new(|x| {
            vec![if x[0] > 0.0 {
                1.0
            } else if x[0] < 0.0 {
                -1.0
            } else {
                0.0
            }]
        })),
        f_star: Some(0.0),
        start_box: vec![(-0.8, 0.8)],
        oracle_only: false,
        meta: ProblemMetadata {
            l_f: Some(1.0),
            l_grad: None,
            l_reduced: Some(1.0),
            c_g: Some(2.0),
            l_g: Some(2.0),
            f_low: Some(0.0),
            smooth: false,
        },
    }
}

/// The full problem suite in stable id order.
pub fn suite() -> Vec<BilevelProblem> {
    let problems = vec![p1(), p2(), p3(), p4(), p5(), p6(), p7(), p8()];
    for p in &problems {
        p.validate();
    }
    problems
}

pub fn by_id(id: &str) -> Result<BilevelProblem> {
    suite()
        .into_iter()
        .find(|p| p.id == id)
        .ok_or_else(|| Error::UnknownProblem(id.to_string()))
}
