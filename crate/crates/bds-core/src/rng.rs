//! Seeded, splittable randomness.
//!
//! Every run owns a single 64-bit seed; all random draws flow from streams
//! split off that seed by label. Splitting is done by mixing the label into
//! the parent seed with SplitMix64, so child streams are independent of the
//! order in which they are created. This is what makes parallel benchmark
//! cells bit-reproducible.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mix_label(seed: u64, label: &str) -> u64 {
    let mut h = splitmix64(seed ^ 0x5bd1_e995);
    for b in label.as_bytes() {
        h = splitmix64(h ^ u64::from(*b));
    }
    h
}

/// A deterministic random stream that can be split into independent
/// child streams by label.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn from_seed(seed: u64) -> Self {
        RngStream {
            seed,
            rng: ChaCha8Rng::seed_from_u64(splitmix64(seed)),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream determined by (parent seed, label) only.
    pub fn split(&self, label: &str) -> RngStream {
        RngStream::from_seed(mix_label(self.seed, label))
    }

    /// Child stream determined by (parent seed, label, index).
    pub fn split_indexed(&self, label: &str, index: u64) -> RngStream {
        RngStream::from_seed(splitmix64(mix_label(self.seed, label) ^ index))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box-Muller on the stream's uniforms.
    pub fn gaussian(&mut self) -> f64 {
        loop {
            let u1 = self.uniform();
            if u1 > 0.0 {
                let u2 = self.uniform();
                return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            }
        }
    }

    pub fn gaussian_vector(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.gaussian()).collect()
    }

    /// Uniform point on the unit sphere in R^n.
    pub fn unit_vector(&mut self, n: usize) -> Vec<f64> {
        loop {
            let v = self.gaussian_vector(n);
            if let Some(u) = crate::linalg::normalized(&v) {
                return u;
            }
        }
    }

    /// Uniform point in the closed ball of the given radius around `center`.
    pub fn in_ball(&mut self, center: &[f64], radius: f64) -> Vec<f64> {
        let n = center.len();
        let dir = self.unit_vector(n);
        let r = radius * self.uniform().powf(1.0 / n as f64);
        crate::linalg::add_scaled(center, r, &dir)
    }

    /// Uniform point in an axis-aligned box.
    pub fn in_box(&mut self, bounds: &[(f64, f64)]) -> Vec<f64> {
        bounds.iter().map(|(lo, hi)| self.uniform_in(*lo, *hi)).collect()
    }
}

/// Deterministic unit vector derived from the bit pattern of `x` and a seed.
/// Same (seed, x) always yields the same vector.
pub fn hashed_unit_vector(seed: u64, x: &[f64], n_out: usize) -> Vec<f64> {
    let mut h = splitmix64(seed ^ 0x9e3a_55aa_c3d1_77ef);
    for c in x {
        h = splitmix64(h ^ c.to_bits());
    }
    let mut stream = RngStream::from_seed(h);
    stream.unit_vector(n_out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;

    #[test]
    fn streams_are_reproducible() {
        let mut a = RngStream::from_seed(42).split("poll");
        let mut b = RngStream::from_seed(42).split("poll");
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn split_labels_decorrelate() {
        let root = RngStream::from_seed(7);
        let a = root.split("a").next_u64();
        let b = root.split("b").next_u64();
        assert_ne!(a, b);
    }

    #[test]
    fn split_is_order_independent() {
        let root = RngStream::from_seed(9);
        let first = root.split_indexed("cell", 3).next_u64();
        let _ = root.split_indexed("cell", 1);
        let again = root.split_indexed("cell", 3).next_u64();
        assert_eq!(first, again);
    }

    #[test]
    fn unit_vectors_have_unit_norm() {
        let mut s = RngStream::from_seed(1);
        for n in 1..6 {
            let v = s.unit_vector(n);
            assert!((norm(&v) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hashed_unit_vector_is_deterministic() {
        let x = [0.25, -3.5];
        let a = hashed_unit_vector(11, &x, 2);
        let b = hashed_unit_vector(11, &x, 2);
        assert_eq!(a, b);
        let c = hashed_unit_vector(12, &x, 2);
        assert_ne!(a, c);
    }

    #[test]
    fn in_ball_stays_in_ball() {
        let mut s = RngStream::from_seed(5);
        let c = [1.0, -2.0, 0.5];
        for _ in 0..200 {
            let p = s.in_ball(&c, 0.3);
            assert!(crate::linalg::dist(&p, &c) <= 0.3 + 1e-12);
        }
    }
}
