//! Poll direction sets and their cosine measure.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::config::DirectionMode;
use crate::error::{Error, Result};
use crate::halton;
use crate::linalg::{self, dot, normalized, solve_small};

/// Shared per-dimension pool of deterministic sphere samples; grown on
/// demand and reused by every cosine-measure estimate.
fn halton_pool(n: usize, len: usize) -> Arc<Vec<Vec<f64>>> {
    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<Vec<Vec<f64>>>>>> = OnceLock::new();
    let pools = POOLS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = pools.lock().expect("halton pool lock");
    let entry = guard.entry(n).or_insert_with(|| Arc::new(Vec::new()));
    if entry.len() < len {
        let mut grown: Vec<Vec<f64>> = (**entry).clone();
        for k in grown.len()..len {
            grown.push(halton::sphere_point(n, k as u64));
        }
        *entry = Arc::new(grown);
    }
    entry.clone()
}

/// A set of poll directions together with how it was generated and, when
/// known exactly, its cosine measure.
#[derive(Debug, Clone)]
pub struct DirectionSet {
    pub dirs: Vec<Vec<f64>>,
    pub mode: DirectionMode,
    pub kappa_hint: Option<f64>,
}

impl DirectionSet {
    pub fn new(dirs: Vec<Vec<f64>>, mode: DirectionMode, kappa_hint: Option<f64>) -> Self {
        DirectionSet { dirs, mode, kappa_hint }
    }

    pub fn dim(&self) -> usize {
        self.dirs.first().map_or(0, |d| d.len())
    }
}

/// True when the set is exactly the 2n signed coordinate vectors.
fn is_signed_basis(dirs: &[Vec<f64>]) -> bool {
    let n = match dirs.first() {
        Some(d) => d.len(),
        None => return false,
    };
    if dirs.len() != 2 * n {
        return false;
    }
    let mut seen = vec![[false, false]; n];
    for d in dirs {
        let mut nonzero = None;
        for (i, v) in d.iter().enumerate() {
            if *v != 0.0 {
                if nonzero.is_some() || (*v != 1.0 && *v != -1.0) {
                    return false;
                }
                nonzero = Some((i, *v > 0.0));
            }
        }
        match nonzero {
            Some((i, pos)) => {
                let slot = if pos { 0 } else { 1 };
                if seen[i][slot] {
                    return false;
                }
                seen[i][slot] = true;
            }
            None => return false,
        }
    }
    seen.iter().all(|s| s[0] && s[1])
}

/// Splits an antipodally paired set into its positive half; `None` when the
/// set does not consist of n exact +/- pairs.
fn antipodal_half(dirs: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = dirs.first()?.len();
    if dirs.len() != 2 * n {
        return None;
    }
    let (first, second) = dirs.split_at(n);
    for (a, b) in first.iter().zip(second) {
        if !a.iter().zip(b).all(|(x, y)| *x == -*y) {
            return None;
        }
    }
    Some(first.to_vec())
}

fn best_alignment(unit_dirs: &[Vec<f64>], v: &[f64]) -> f64 {
    unit_dirs
        .iter()
        .map(|d| dot(d, v))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Projected subgradient descent on the sphere for min_v max_d cos(d, v),
/// starting from `v0`. Returns the best point visited.
fn refine(unit_dirs: &[Vec<f64>], v0: &[f64], steps: usize) -> (Vec<f64>, f64) {
    let mut v = v0.to_vec();
    let mut best_v = v.clone();
    let mut best = best_alignment(unit_dirs, &v);
    let mut eta = 0.3;
    for _ in 0..steps {
        let (mut arg, mut val) = (0usize, f64::NEG_INFINITY);
        for (i, d) in unit_dirs.iter().enumerate() {
            let c = dot(d, &v);
            if c > val {
                val = c;
                arg = i;
            }
        }
        // Riemannian subgradient step away from the most aligned direction
        let d = &unit_dirs[arg];
        let tangential: Vec<f64> = d.iter().zip(&v).map(|(dc, vc)| dc - val * vc).collect();
        let stepped = linalg::add_scaled(&v, -eta, &tangential);
        match normalized(&stepped) {
            Some(u) => v = u,
            None => break,
        }
        let cur = best_alignment(unit_dirs, &v);
        if cur < best {
            best = cur;
            best_v = v.clone();
        }
        eta *= 0.97;
    }
    (best_v, best)
}

/// Cosine measure of a direction set:
/// the worst-case over unit vectors v of the best alignment max_d cos(d, v).
///
/// Exact for dimension 1 and for the signed coordinate basis. Otherwise
/// estimated by a deterministic multistart search: equalizing candidates
/// from every sign pattern (for antipodally paired square sets), a Halton
/// sphere sample, and projected-subgradient refinement of the best starts.
/// A sampled minimum can only overestimate the true value, so for n > 3
/// treat the result as a lower-confidence estimate.
pub fn cosine_measure(set: &DirectionSet) -> Result<f64> {
    let samples = if set.dim() <= 3 { 20_000 } else { 4_000 };
    cosine_measure_sampled(set, samples)
}

/// As [`cosine_measure`] with an explicit sphere-sampling budget. Solvers
/// that re-estimate the measure every iteration use a smaller budget; the
/// equalizing sign-pattern candidates and the refinement stage carry the
/// accuracy for the antipodally paired sets they generate.
pub fn cosine_measure_sampled(set: &DirectionSet, samples: usize) -> Result<f64> {
    let dirs = &set.dirs;
    if dirs.is_empty() {
        return Err(Error::EmptyDirectionSet);
    }
    let n = dirs[0].len();
    assert!(dirs.iter().all(|d| d.len() == n && linalg::norm(d) > 0.0));

    if n == 1 {
        // enumerate v in {+1, -1}
        let unit: Vec<f64> = dirs.iter().map(|d| d[0].signum()).collect();
        let up = unit.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let down = unit.iter().map(|d| -d).fold(f64::NEG_INFINITY, f64::max);
        return Ok(up.min(down));
    }
    if is_signed_basis(dirs) {
        return Ok(1.0 / (n as f64).sqrt());
    }

    let unit_dirs: Vec<Vec<f64>> = dirs
        .iter()
        .map(|d| normalized(d).expect("nonzero direction"))
        .collect();

    let mut pool: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        pool.push(e.clone());
        e[i] = -1.0;
        pool.push(e);
    }
    // equalizing candidates: v with d_i . v = sigma_i, one per sign pattern
    if n <= 12 {
        if let Some(half) = antipodal_half(dirs) {
            let rows: Vec<Vec<f64>> = half
                .iter()
                .map(|d| normalized(d).expect("nonzero direction"))
                .collect();
            for mask in 0..(1u32 << n) {
                let sigma: Vec<f64> = (0..n)
                    .map(|i| if mask & (1 << i) != 0 { 1.0 } else { -1.0 })
                    .collect();
                if let Some(v) = solve_small(&rows, &sigma) {
                    if let Some(u) = normalized(&v) {
                        pool.push(u);
                    }
                }
            }
        }
    }
    let sphere = halton_pool(n, samples);
    let mut scored: Vec<(f64, &[f64])> = pool
        .iter()
        .map(|v| (best_alignment(&unit_dirs, v), v.as_slice()))
        .chain(
            sphere[..samples]
                .iter()
                .map(|v| (best_alignment(&unit_dirs, v), v.as_slice())),
        )
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = scored[0].0;
    for (_, v) in scored.iter().take(8) {
        let (_, refined) = refine(&unit_dirs, v, 150);
        best = best.min(refined);
    }
    Ok(best)
}
