//! Mesh-based direct search with simple decrease.
//!
//! Candidate points live on the mesh {x_k + alpha_k D y}, with the default
//! basis D = [+e_i, -e_i], so every poll step is an integer vector scaled by
//! the mesh size. Frame size Delta_k and mesh size alpha_k are maintained in
//! exact rational arithmetic (powers of theta times alpha_min), and iterates
//! are updated as exact rationals as well, so mesh residence is certified
//! exactly rather than up to floating-point noise. Function evaluations use
//! the floating-point image of the exact iterate.
//!
//! Directions are built by scaling a target unit vector to the frame radius
//! and rounding componentwise: d = round((Delta/alpha) u). Rounding moves
//! each coordinate by at most 1/2, so realized step norms obey
//! ||alpha d|| in [Delta - alpha sqrt(n)/2, Delta + alpha sqrt(n)/2], and
//! the per-iteration norm brackets b1, b2 recorded in the trace tighten to 1
//! as alpha/Delta goes to 0. Target vectors are a Halton sphere sequence
//! (nonsmooth mode, one antipodal pair) or a random rotation of the signed
//! basis (smooth mode, positive spanning).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::config::{DirectionMode, SolverConfig};
use crate::direction::{cosine_measure, cosine_measure_sampled, DirectionSet};
use crate::error::{Error, Result};
use crate::halton;
use crate::ledger::{decrease_accepted, evaluate_reduced, DecreaseRule, EvalLedger};
use crate::lower_level::{make_oracle, LowerOracle};
use crate::problem::BilevelProblem;
use crate::rng::RngStream;
use crate::trace::{MeshAudit, MeshRowExtra, Termination, Trace, TraceRow};

const MAX_REDRAWS: usize = 100;

/// Mesh description: center, size parameter, and generating basis.
#[derive(Debug, Clone)]
pub struct MeshSpec {
    pub center: Vec<f64>,
    pub alpha: f64,
    pub basis: MeshBasis,
}

/// D = G * Zcols. Membership queries are only decidable for the default
/// basis (G = I, Zcols = signed coordinate vectors); a general basis turns
/// membership into an integer program.
#[derive(Debug, Clone)]
pub enum MeshBasis {
    Default,
    Custom { g: Vec<Vec<f64>>, zcols: Vec<Vec<i64>> },
}

impl MeshSpec {
    pub fn with_default_basis(center: Vec<f64>, alpha: f64) -> Self {
        assert!(alpha > 0.0);
        MeshSpec { center, alpha, basis: MeshBasis::Default }
    }

    /// The positive-spanning check on the generating directions.
    pub fn validate(&self) -> Result<()> {
        let dirs = match &self.basis {
            MeshBasis::Default => {
                let n = self.center.len();
                let mut dirs = Vec::new();
                for s in [1.0, -1.0] {
                    for i in 0..n {
                        let mut e = vec![0.0; n];
                        e[i] = s;
                        dirs.push(e);
                    }
                }
                dirs
            }
            MeshBasis::Custom { g, zcols } => zcols
                .iter()
                .map(|z| {
                    let zf: Vec<f64> = z.iter().map(|v| *v as f64).collect();
                    crate::linalg::mat_vec(g, &zf)
                })
                .collect(),
        };
        let cm = cosine_measure(&DirectionSet::new(dirs, DirectionMode::Mesh, None))?;
        if cm <= 0.0 {
            return Err(Error::InvalidConfig(
                "mesh basis does not positively span".into(),
            ));
        }
        Ok(())
    }
}

/// Whether `point` lies on the mesh: each coordinate offset from the center
/// must be an integer multiple of alpha within `tol`. Only the default
/// basis is supported.
pub fn mesh_contains(spec: &MeshSpec, point: &[f64], tol: f64) -> Result<bool> {
    if let MeshBasis::Custom { .. } = spec.basis {
        return Err(Error::UnsupportedMesh);
    }
    assert_eq!(point.len(), spec.center.len());
    Ok(point.iter().zip(&spec.center).all(|(p, c)| {
        let t = (p - c) / spec.alpha;
        (t - t.round()).abs() <= tol
    }))
}

/// Per-iteration state of a mesh run, in floating point.
#[derive(Debug, Clone)]
pub struct MeshState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub f_tilde: f64,
    /// Mesh size parameter.
    pub alpha: f64,
    /// Frame size parameter.
    pub delta: f64,
    pub k: u64,
}

/// Successful iteration: Delta' = Delta / theta, alpha' = min(Delta', Delta'^2).
pub fn update_on_success(
    delta: &BigRational,
    theta: &BigRational,
) -> (BigRational, BigRational) {
    let delta_next = delta / theta;
    let alpha_next = (&delta_next * &delta_next).min(delta_next.clone());
    (delta_next, alpha_next)
}

/// Unsuccessful iteration: Delta' = max(alpha_min, theta Delta) and
/// alpha' = min(Delta', Delta'^2) in smooth mode, additionally capped by
/// theta * alpha in nonsmooth mode.
pub fn update_on_failure(
    delta: &BigRational,
    alpha: &BigRational,
    theta: &BigRational,
    alpha_min: &BigRational,
    smooth: bool,
) -> (BigRational, BigRational) {
    let delta_next = (theta * delta).max(alpha_min.clone());
    let mut alpha_next = (&delta_next * &delta_next).min(delta_next.clone());
    if !smooth {
        alpha_next = alpha_next.min(theta * alpha);
    }
    (delta_next, alpha_next)
}

/// Nearest integer, halves away from zero.
fn round_rational(r: &BigRational) -> BigInt {
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    if r.is_negative() {
        -((half - r).floor().to_integer())
    } else {
        (r + half).floor().to_integer()
    }
}

/// Componentwise rounding of (ratio * u) to an integer direction.
pub fn round_direction(ratio: &BigRational, u: &[f64]) -> Vec<BigInt> {
    u.iter()
        .map(|c| {
            let cf = BigRational::from_float(*c).expect("finite target coordinate");
            round_rational(&(ratio * cf))
        })
        .collect()
}

fn int_norm(d: &[BigInt]) -> f64 {
    let sq: BigInt = d.iter().map(|c| c * c).sum();
    sq.to_f64().unwrap_or(f64::INFINITY).sqrt()
}

fn is_zero_dir(d: &[BigInt]) -> bool {
    d.iter().all(|c| c.is_zero())
}

/// Integer poll directions for one mesh iteration, with realized norm
/// brackets and the cosine-measure estimate of the rounded set.
#[derive(Debug, Clone)]
pub struct MeshDirections {
    pub dirs: Vec<Vec<BigInt>>,
    pub b1: f64,
    pub b2: f64,
    pub kappa_realized: f64,
}

/// Generates the poll directions on the current mesh. `ratio` is
/// Delta_k / alpha_k (>= 1). Nonsmooth mode emits one antipodal pair from
/// the dense Halton sphere sequence; smooth mode emits a rounded random
/// rotation of the signed basis and retries until the set positively spans.
pub fn gen_mesh_directions(
    n: usize,
    ratio: &BigRational,
    smooth: bool,
    halton_index: &mut u64,
    rng: &mut RngStream,
) -> Result<MeshDirections> {
    let ratio_f = rational_to_f64(ratio);
    let finish = |dirs: Vec<Vec<BigInt>>| -> Result<MeshDirections> {
        let norms: Vec<f64> = dirs.iter().map(|d| int_norm(d)).collect();
        let b1 = norms.iter().cloned().fold(f64::INFINITY, f64::min) / ratio_f;
        let b2 = norms.iter().cloned().fold(0.0f64, f64::max) / ratio_f;
        let fdirs: Vec<Vec<f64>> = dirs
            .iter()
            .map(|d| d.iter().map(|c| c.to_f64().unwrap_or(0.0)).collect())
            .collect();
        let samples = if fdirs[0].len() <= 3 { 2_000 } else { 1_000 };
        let kappa_realized =
            cosine_measure_sampled(&DirectionSet::new(fdirs, DirectionMode::Mesh, None), samples)?;
        Ok(MeshDirections { dirs, b1, b2, kappa_realized })
    };

    if !smooth {
        for _ in 0..MAX_REDRAWS {
            let u = halton::sphere_point(n, *halton_index);
            *halton_index += 1;
            let d = round_direction(ratio, &u);
            if is_zero_dir(&d) {
                continue;
            }
            let neg: Vec<BigInt> = d.iter().map(|c| -c).collect();
            return finish(vec![d, neg]);
        }
        return Err(Error::DegenerateDirection(MAX_REDRAWS));
    }

    for _ in 0..MAX_REDRAWS {
        let rotation =
            crate::linalg::orthonormalize((0..n).map(|_| rng.gaussian_vector(n)).collect());
        let mut half: Vec<Vec<BigInt>> = Vec::with_capacity(n);
        let mut ok = true;
        for q in rotation {
            let mut d = round_direction(ratio, &q);
            let mut tries = 0;
            while is_zero_dir(&d) {
                tries += 1;
                if tries > MAX_REDRAWS {
                    ok = false;
                    break;
                }
                d = round_direction(ratio, &rng.unit_vector(n));
            }
            if !ok {
                break;
            }
            half.push(d);
        }
        if !ok {
            continue;
        }
        let mut dirs = half.clone();
        dirs.extend(half.iter().map(|d| d.iter().map(|c| -c).collect::<Vec<_>>()));
        let out = finish(dirs)?;
        if out.kappa_realized > 0.0 {
            return Ok(out);
        }
    }
    Err(Error::DegenerateDirection(MAX_REDRAWS))
}

/// Rational to f64 with explicit scaling, robust to numerators and
/// denominators far outside the f64 exponent range.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let neg = r.is_negative();
    let num = r.numer().abs();
    let den = r.denom().abs();
    let shift = 62 - (num.bits() as i64 - den.bits() as i64);
    let (n2, d2) = if shift >= 0 {
        (num << shift as u64, den)
    } else {
        (num, den << (-shift) as u64)
    };
    let q = (n2 / d2).to_f64().unwrap_or(f64::INFINITY);
    let v = ldexp(q, -shift as i32);
    if neg {
        -v
    } else {
        v
    }
}

fn ldexp(x: f64, e: i32) -> f64 {
    let mut v = x;
    let mut e = e;
    while e > 900 {
        v *= f64::powi(2.0, 900);
        e -= 900;
    }
    while e < -900 {
        v *= f64::powi(2.0, -900);
        e += 900;
    }
    v * f64::powi(2.0, e)
}

fn to_f64_vec(x: &[BigRational]) -> Vec<f64> {
    x.iter().map(rational_to_f64).collect()
}

/// Optional search step for mesh runs. Proposals are integer offsets in
/// mesh units from the current iterate, which keeps every candidate on the
/// mesh by construction. Shipped unused.
pub type MeshSearchHook<'a> = dyn FnMut(u64, &[f64], f64, f64) -> Vec<Vec<BigInt>> + 'a;

/// Runs the mesh solver from `x0`. Smooth mode terminates once the frame
/// size sits at the floor through two consecutive unsuccessful iterations;
/// nonsmooth mode runs to the budget or the iteration cap.
pub fn run_mesh(
    problem: &BilevelProblem,
    config: &SolverConfig,
    x0: &[f64],
    oracle: &mut dyn LowerOracle,
) -> Result<Trace> {
    run_mesh_with_search(problem, config, x0, oracle, None)
}

/// As [`run_mesh`] with an optional search step ahead of each poll.
pub fn run_mesh_with_search(
    problem: &BilevelProblem,
    config: &SolverConfig,
    x0: &[f64],
    oracle: &mut dyn LowerOracle,
    mut search: Option<&mut MeshSearchHook<'_>>,
) -> Result<Trace> {
    config.validate_mesh()?;
    assert_eq!(x0.len(), problem.n_x);
    let n = problem.n_x;
    let theta = config.theta.to_big();
    let alpha_min = BigRational::from_float(config.alpha_min)
        .ok_or_else(|| Error::InvalidConfig("alpha_min is not finite".into()))?;
    let floor_rule = config.smooth_mesh && config.alpha_min > 0.0;

    let mut rng = RngStream::from_seed(config.seed).split("mesh");
    let mut halton_index = 0u64;
    let mut ledger = EvalLedger::new(config.budget);
    let mut audit = MeshAudit::default();

    let mut delta = BigRational::from_float(config.alpha0)
        .ok_or_else(|| Error::InvalidConfig("alpha0 is not finite".into()))?;
    let mut alpha = delta.clone();
    let mut x_exact: Vec<BigRational> = x0
        .iter()
        .map(|c| BigRational::from_float(*c).ok_or(Error::NonFiniteValue {
            context: "starting point",
            x: x0.to_vec(),
        }))
        .collect::<Result<_>>()?;

    let (y0, f0) = evaluate_reduced(problem, x0, oracle, &mut ledger)?;
    let mut state = MeshState {
        x: x0.to_vec(),
        y: y0,
        f_tilde: f0,
        alpha: rational_to_f64(&alpha),
        delta: rational_to_f64(&delta),
        k: 0,
    };
    let mut rows = vec![TraceRow {
        k: 0,
        upper_evals: ledger.upper_evals,
        success: false,
        alpha: state.alpha,
        f_tilde: f0,
        x: x0.to_vec(),
        mesh: Some(MeshRowExtra {
            delta: state.delta,
            delta_exact: rational_string(&delta),
            b1: f64::NAN,
            b2: f64::NAN,
            kappa_realized: f64::NAN,
        }),
    }];
    let mut floor_failures = 0u32;

    let termination = loop {
        if state.k >= config.iter_cap {
            break Termination::IterCap;
        }
        if ledger.is_exhausted() {
            break Termination::Budget;
        }
        debug_assert!(alpha <= delta, "mesh size must not exceed frame size");
        if config.alpha_min > 0.0 {
            debug_assert!(delta >= alpha_min);
        }

        let ratio = &delta / &alpha;
        let mut success: Option<(Vec<BigRational>, Vec<f64>, Vec<f64>, f64)> = None;
        let mut budget_hit = false;

        // try one candidate on the mesh; first strict decrease wins
        let try_point = |d: &[BigInt],
                             x_exact: &[BigRational],
                             incumbent_f: f64,
                             incumbent_alpha: f64,
                             ledger: &mut EvalLedger,
                             oracle: &mut dyn LowerOracle,
                             audit: &mut MeshAudit|
         -> Result<Option<(Vec<BigRational>, Vec<f64>, Vec<f64>, f64)>> {
            let p_exact: Vec<BigRational> = x_exact
                .iter()
                .zip(d)
                .map(|(c, di)| c + &alpha * BigRational::from_integer(di.clone()))
                .collect();
            audit_mesh_point(audit, x_exact, &p_exact, &alpha, d);
            let p = to_f64_vec(&p_exact);
            match evaluate_reduced(problem, &p, oracle, ledger) {
                Ok((y, f)) => {
                    if decrease_accepted(f, incumbent_f, incumbent_alpha, DecreaseRule::Simple, 0.0)
                    {
                        Ok(Some((p_exact, p, y, f)))
                    } else {
                        Ok(None)
                    }
                }
                Err(Error::NonFiniteValue { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        };

        if let Some(hook) = search.as_mut() {
            let proposals = hook(state.k, &state.x, state.alpha, state.delta);
            for d in proposals {
                match try_point(&d, &x_exact, state.f_tilde, state.alpha, &mut ledger, oracle, &mut audit)
                {
                    Ok(Some(hit)) => {
                        success = Some(hit);
                        break;
                    }
                    Ok(None) => {}
                    Err(Error::BudgetExhausted { .. }) => {
                        budget_hit = true;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
        }

        let mut dir_info: Option<MeshDirections> = None;
        if success.is_none() && !budget_hit {
            let dirs =
                gen_mesh_directions(n, &ratio, config.smooth_mesh, &mut halton_index, &mut rng)?;
            for d in &dirs.dirs {
                match try_point(d, &x_exact, state.f_tilde, state.alpha, &mut ledger, oracle, &mut audit)
                {
                    Ok(Some(hit)) => {
                        success = Some(hit);
                        break;
                    }
                    Ok(None) => {}
                    Err(Error::BudgetExhausted { .. }) => {
                        budget_hit = true;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            dir_info = Some(dirs);
        }
        if budget_hit {
            break Termination::Budget;
        }

        let alpha_used = state.alpha;
        let delta_used = state.delta;
        let delta_exact_used = rational_string(&delta);
        let successful = success.is_some();
        if let Some((p_exact, p, y, f)) = success {
            x_exact = p_exact;
            state.x = p;
            state.y = y;
            state.f_tilde = f;
            floor_failures = 0;
            let (dn, an) = update_on_success(&delta, &theta);
            delta = dn;
            alpha = an;
        } else {
            let at_floor = config.alpha_min > 0.0 && delta == alpha_min;
            if at_floor {
                floor_failures += 1;
            } else {
                floor_failures = 0;
            }
            let (dn, an) = update_on_failure(&delta, &alpha, &theta, &alpha_min, config.smooth_mesh);
            delta = dn;
            alpha = an;
        }
        state.alpha = rational_to_f64(&alpha);
        state.delta = rational_to_f64(&delta);
        state.k += 1;
        rows.push(TraceRow {
            k: state.k,
            upper_evals: ledger.upper_evals,
            success: successful,
            alpha: alpha_used,
            f_tilde: state.f_tilde,
            x: state.x.clone(),
            mesh: Some(MeshRowExtra {
                delta: delta_used,
                delta_exact: delta_exact_used,
                b1: dir_info.as_ref().map_or(f64::NAN, |d| d.b1),
                b2: dir_info.as_ref().map_or(f64::NAN, |d| d.b2),
                kappa_realized: dir_info.as_ref().map_or(f64::NAN, |d| d.kappa_realized),
            }),
        });
        if floor_rule && floor_failures >= 2 {
            break Termination::Floor;
        }
    };

    Ok(Trace {
        problem_id: problem.id.clone(),
        solver_id: "mesh-ds".into(),
        seed: config.seed,
        n_x: n,
        rows,
        termination,
        upper_evals: ledger.upper_evals,
        lower_oracle_calls: ledger.lower_oracle_calls,
        lower_inner_iters: ledger.lower_inner_iters,
        mesh_audit: Some(audit),
    })
}

/// Exact mesh residence check: the offset of the poll point from the center
/// in mesh units must equal the integer direction. The residual is computed
/// in exact arithmetic and only then converted to floating point.
fn audit_mesh_point(
    audit: &mut MeshAudit,
    center: &[BigRational],
    point: &[BigRational],
    alpha: &BigRational,
    d: &[BigInt],
) {
    audit.points_checked += 1;
    let mut max_res = 0.0f64;
    for ((c, p), di) in center.iter().zip(point).zip(d) {
        let offset = (p - c) / alpha;
        let res = (&offset - BigRational::from_integer(di.clone())).abs();
        max_res = max_res.max(rational_to_f64(&res));
    }
    if max_res <= 1e-12 {
        audit.points_on_mesh += 1;
    }
    audit.max_residual = audit.max_residual.max(max_res);
}

fn rational_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Convenience wrapper building the configured oracle and running from x0.
pub fn solve_mesh(problem: &BilevelProblem, config: &SolverConfig, x0: &[f64]) -> Result<Trace> {
    let mut oracle = make_oracle(
        problem,
        config.oracle_kind,
        config.eps_oracle,
        config.seed,
        config.g_lb,
    )?;
    run_mesh(problem, config, x0, oracle.as_mut())
}
