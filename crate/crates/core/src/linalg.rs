//! Small dense symmetric solves on row-major buffers.

/// Overwrites the lower triangle of `a` (row-major, `n x n`) with its
/// Cholesky factor. Fails when a pivot is not above `rel_tol * max_diag`.
pub(crate) fn cholesky_in_place(a: &mut [f64], n: usize, rel_tol: f64) -> bool {
    debug_assert_eq!(a.len(), n * n);
    let max_diag = (0..n).map(|i| a[i * n + i]).fold(0.0_f64, f64::max);
    let floor = rel_tol * max_diag;
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > floor) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

/// Solves `L Lᵀ x = b` in place given the factor from [`cholesky_in_place`].
pub(crate) fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Least squares via the normal equations. `rows` are regressor rows.
/// Returns `None` when the design is rank deficient.
pub(crate) fn least_squares<'a>(
    rows: impl Iterator<Item = (&'a [f64], f64)>,
    dim: usize,
) -> Option<Vec<f64>> {
    let mut gram = vec![0.0; dim * dim];
    let mut rhs = vec![0.0; dim];
    for (x, y) in rows {
        for i in 0..dim {
            rhs[i] += x[i] * y;
            for j in 0..=i {
                gram[i * dim + j] += x[i] * x[j];
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            gram[j * dim + i] = gram[i * dim + j];
        }
    }
    if !cholesky_in_place(&mut gram, dim, 1e-12) {
        return None;
    }
    cholesky_solve(&gram, dim, &mut rhs);
    Some(rhs)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        let mut a = vec![4.0, 2.0, 2.0, 3.0];
        assert!(cholesky_in_place(&mut a, 2, 0.0));
        let mut b = vec![2.0, 1.0];
        cholesky_solve(&a, 2, &mut b);
        // [[4,2],[2,3]] x = [2,1] -> x = [0.5, 0]
        assert!((b[0] - 0.5).abs() < 1e-15 && b[1].abs() < 1e-15);
    }

    #[test]
    fn rejects_singular() {
        let mut a = vec![1.0, 1.0, 1.0, 1.0];
        assert!(!cholesky_in_place(&mut a, 2, 1e-12));
    }

    #[test]
    fn least_squares_line() {
        let rows: Vec<(Vec<f64>, f64)> = (0..5)
            .map(|i| (vec![1.0, i as f64], 2.0 + 3.0 * i as f64))
            .collect();
        let beta = least_squares(rows.iter().map(|(x, y)| (x.as_slice(), *y)), 2).unwrap();
        assert!((beta[0] - 2.0).abs() < 1e-12 && (beta[1] - 3.0).abs() < 1e-12);
    }
}
