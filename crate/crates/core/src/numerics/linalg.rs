//! Cholesky factorization and SPD linear solves.

use alloc::vec;
use alloc::vec::Vec;

use super::{Matrix, NumericsError};
use crate::math;

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = A`.
///
/// The input is symmetrized as `(A + Aᵀ)/2` before factoring, since covariance
/// assembly accumulates asymmetry at machine precision. Fails with
/// [`NumericsError::NotPositiveDefinite`] when a pivot is non-positive.
pub fn cholesky(a: &Matrix) -> Result<Matrix, NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::DimensionMismatch);
    }
    let a = a.symmetrized();
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(NumericsError::NotPositiveDefinite);
                }
                l[(i, i)] = math::sqrt(sum);
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solves `A·X = B` for SPD `A` via Cholesky and two triangular sweeps.
pub fn solve_spd(a: &Matrix, b: &Matrix) -> Result<Matrix, NumericsError> {
    if a.rows() != b.rows() {
        return Err(NumericsError::DimensionMismatch);
    }
    let l = cholesky(a)?;
    let n = a.rows();
    let mut x = Matrix::zeros(n, b.cols());
    let mut y = vec![0.0; n];
    for j in 0..b.cols() {
        // Forward: L y = b_j
        for i in 0..n {
            let mut sum = b[(i, j)];
            for k in 0..i {
                sum -= l[(i, k)] * y[k];
            }
            y[i] = sum / l[(i, i)];
        }
        // Backward: Lᵀ x_j = y
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in (i + 1)..n {
                sum -= l[(k, i)] * x[(k, j)];
            }
            x[(i, j)] = sum / l[(i, i)];
        }
    }
    Ok(x)
}

/// Inverse of an SPD matrix (solve against the identity).
pub fn spd_inverse(a: &Matrix) -> Result<Matrix, NumericsError> {
    solve_spd(a, &Matrix::identity(a.rows()))
}

/// Solves the general square system `A·x = b` by Gaussian elimination with
/// partial pivoting. Returns `None` when `A` is numerically singular.
pub(crate) fn solve_general(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows();
    if !a.is_square() || b.len() != n {
        return None;
    }
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| {
                math::abs(m[r][col])
                    .partial_cmp(&math::abs(m[s][col]))
                    .unwrap()
            })
            .unwrap();
        if math::abs(m[pivot_row][col]) < 1e-300 {
            return None;
        }
        m.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        for r in (col + 1)..n {
            let f = m[r][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = rhs[i];
        for k in (i + 1)..n {
            sum -= m[i][k] * x[k];
        }
        x[i] = sum / m[i][i];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}
