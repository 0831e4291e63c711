//! Small dense vector/matrix helpers.
//!
//! Problem dimensions here are tiny (n <= 10), so everything works on plain
//! `&[f64]` slices and hand-rolled loops.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add_scaled(a: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    a.iter().zip(d).map(|(x, y)| x + t * y).collect()
}

pub fn scale(t: f64, a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| t * x).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some(scale(1.0 / n, a))
    } else {
        None
    }
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Per-coordinate clamp of `z` into the box `bounds` (lower, upper per
/// coordinate; infinities allowed).
pub fn clamp_box(z: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    z.iter()
        .zip(bounds)
        .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
        .collect()
}

/// Dense matrix-vector product for a row-major square matrix.
pub fn mat_vec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, x)).collect()
}

/// Solves the n x n system `a * x = b` by Gaussian elimination with partial
/// pivoting. Returns `None` when the matrix is numerically singular.
pub fn solve_small(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().map(|r| r.clone()).collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let (pivot_row, pivot_abs) = (col..n)
            .map(|r| (r, m[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if pivot_abs < 1e-300 {
            return None;
        }
        m.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        for r in (col + 1)..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for c in (row + 1)..n {
            acc -= m[row][c] * x[c];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Orthonormalizes the given rows with modified Gram-Schmidt. Rows that
/// collapse are replaced by coordinate vectors so the output always has full
/// rank.
pub fn orthonormalize(rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (i, row) in rows.into_iter().enumerate() {
        let mut v = row;
        for u in &q {
            let p = dot(&v, u);
            for (vc, uc) in v.iter_mut().zip(u) {
                *vc -= p * uc;
            }
        }
        match normalized(&v) {
            Some(u) if norm(&v) > 1e-12 => q.push(u),
            _ => {
                // degenerate draw: fall back to the i-th basis vector,
                // re-orthogonalized against what we have
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                for u in &q {
                    let p = dot(&e, u);
                    for (vc, uc) in e.iter_mut().zip(u) {
                        *vc -= p * uc;
                    }
                }
                q.push(normalized(&e).unwrap_or(e));
            }
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_small_identity() {
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let x = solve_small(&a, &[3.0, -2.0]).unwrap();
        assert_eq!(x, vec![3.0, -2.0]);
    }

    #[test]
    fn solve_small_general() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = solve_small(&a, &[5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn solve_small_singular_is_none() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(solve_small(&a, &[1.0, 2.0]).is_none());
    }

    #[test]
    fn orthonormalize_produces_orthonormal_rows() {
        let rows = vec![vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0]];
        let q = orthonormalize(rows);
        for i in 0..3 {
            assert!((norm(&q[i]) - 1.0).abs() < 1e-12);
            for j in (i + 1)..3 {
                assert!(dot(&q[i], &q[j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn clamp_box_mixed_bounds() {
        let z = vec![-3.0, 0.5, 7.0];
        let b = vec![(-1.0, 1.0), (f64::NEG_INFINITY, f64::INFINITY), (0.0, 2.0)];
        assert_eq!(clamp_box(&z, &b), vec![-1.0, 0.5, 2.0]);
    }
}
