//! Halton quasirandom sequences and their map to the unit sphere.
//!
//! The sphere map feeds the "dense" polling mode: the k-th direction is
//! obtained by pushing the k-th Halton tuple through Box-Muller and
//! normalizing. The Halton sequence is dense in the unit cube, Box-Muller is
//! continuous with full-measure image, so the resulting direction sequence
//! is dense in the unit sphere while staying fully deterministic.

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// The index-th element (1-based) of the van der Corput sequence in the
/// given base, in (0, 1).
pub fn van_der_corput(base: u64, index: u64) -> f64 {
    debug_assert!(base > 1);
    let mut n = index;
    let mut denom = 1.0;
    let mut out = 0.0;
    while n > 0 {
        denom *= base as f64;
        out += (n % base) as f64 / denom;
        n /= base;
    }
    out
}

/// The index-th Halton tuple in the first `dim` prime bases. `index` is
/// 1-based so the zero tuple never occurs.
pub fn halton_tuple(dim: usize, index: u64) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "halton tuple dimension too large");
    PRIMES[..dim].iter().map(|&b| van_der_corput(b, index)).collect()
}

fn box_muller_pair(u1: f64, u2: f64) -> (f64, f64) {
    let r = (-2.0 * u1.ln()).sqrt();
    let t = 2.0 * std::f64::consts::PI * u2;
    (r * t.cos(), r * t.sin())
}

/// Deterministic unit vector in R^n: Box-Muller applied to the k-th Halton
/// tuple in the first 2*ceil(n/2) prime bases, then normalized.
pub fn sphere_point(n: usize, k: u64) -> Vec<f64> {
    assert!(n >= 1);
    let pairs = n.div_ceil(2);
    let mut index = k + 1; // 1-based; index 0 would give the zero tuple
    loop {
        let u = halton_tuple(2 * pairs, index);
        let mut z = Vec::with_capacity(2 * pairs);
        for p in 0..pairs {
            let (a, b) = box_muller_pair(u[2 * p], u[2 * p + 1]);
            z.push(a);
            z.push(b);
        }
        z.truncate(n);
        if let Some(v) = crate::linalg::normalized(&z) {
            return v;
        }
        // essentially unreachable: step to a fresh tuple deterministically
        index = index.wrapping_add(0x9e37_79b9);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;

    #[test]
    fn van_der_corput_base_2_prefix() {
        let expected = [0.5, 0.25, 0.75, 0.125, 0.625, 0.375, 0.875];
        for (i, e) in expected.iter().enumerate() {
            assert_eq!(van_der_corput(2, i as u64 + 1), *e);
        }
    }

    #[test]
    fn van_der_corput_base_3_prefix() {
        let expected = [1.0 / 3.0, 2.0 / 3.0, 1.0 / 9.0, 4.0 / 9.0, 7.0 / 9.0];
        for (i, e) in expected.iter().enumerate() {
            assert!((van_der_corput(3, i as u64 + 1) - e).abs() < 1e-15);
        }
    }

    #[test]
    fn sphere_points_are_unit() {
        for n in 1..=7 {
            for k in 0..50 {
                let v = sphere_point(n, k);
                assert_eq!(v.len(), n);
                assert!((norm(&v) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sphere_points_vary_with_k() {
        let a = sphere_point(3, 0);
        let b = sphere_point(3, 1);
        assert!(crate::linalg::dist(&a, &b) > 1e-6);
    }
}
