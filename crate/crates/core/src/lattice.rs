//! Integer coefficient-vector selection by LLL basis reduction.
//!
//! Throughout this module a matrix `F` describes a lattice through its rows:
//! the candidate vectors are integer combinations `a` of those rows, measured
//! in the norm `‖a‖_F = sqrt(aᵀ (F·Fᵀ) a)`. Passing a Cholesky factor of a
//! covariance matrix therefore makes `‖a‖_F²` exactly the quadratic form that
//! appears in the rate formulas, which is the quantity the coefficient
//! matrices must minimize.
//!
//! Reduction maintains exact `i64` coefficient vectors; Gram–Schmidt data is
//! floating point and recomputed from scratch after every basis operation,
//! which bounds drift at the small dimensions used here.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::numerics::{cholesky, IntegerMatrix, Matrix};

/// Classical default for the Lovász parameter.
pub const DEFAULT_DELTA: f64 = 0.75;

/// Failure modes of lattice reduction and selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeError {
    /// The Gram matrix of the supplied factor is not positive definite.
    RankDeficient,
    /// Fewer independent candidate rows than requested (cannot occur for
    /// candidates produced by a unimodular reduction).
    SelectionFailed,
    /// Brute-force enumeration limits exceeded.
    TooLarge,
}

impl fmt::Display for LatticeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::RankDeficient => write!(f, "lattice factor is rank deficient"),
            Self::SelectionFailed => write!(f, "not enough independent candidate rows"),
            Self::TooLarge => write!(f, "instance exceeds brute-force enumeration limits"),
        }
    }
}

impl core::error::Error for LatticeError {}

/// Output of [`lll_reduce`]: a unimodular coefficient matrix, the norm of each
/// row under the input factor, and the Lovász parameter used.
#[derive(Debug, Clone)]
pub struct ReductionResult {
    /// Rows are coefficient vectors `a`; the matrix is unimodular.
    pub reduced_basis: IntegerMatrix,
    /// `‖a_i‖_F` per row, in row order.
    pub norms: Vec<f64>,
    pub delta: f64,
}

/// Gram matrix `F·Fᵀ` of the factor, checked for positive definiteness.
fn gram_of(factor: &Matrix) -> Result<Matrix, LatticeError> {
    let g = factor.mul(&factor.transpose()).symmetrized();
    cholesky(&g).map_err(|_| LatticeError::RankDeficient)?;
    Ok(g)
}

fn gram_dot(g: &Matrix, a: &[i64], b: &[i64]) -> f64 {
    let mut acc = 0.0;
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        let mut row = 0.0;
        for (j, &bj) in b.iter().enumerate() {
            if bj != 0 {
                row += g[(i, j)] * bj as f64;
            }
        }
        acc += ai as f64 * row;
    }
    acc
}

/// Gram–Schmidt data for the current basis: `mu[i][j]` for `j < i` and the
/// squared norms of the orthogonalized vectors.
fn gram_schmidt(g: &Matrix, basis: &[Vec<i64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let m = basis.len();
    let mut mu = vec![vec![0.0; m]; m];
    let mut bstar_sq = vec![0.0; m];
    for i in 0..m {
        let mut bi_sq = gram_dot(g, &basis[i], &basis[i]);
        for j in 0..i {
            let mut proj = gram_dot(g, &basis[i], &basis[j]);
            for k in 0..j {
                proj -= mu[i][k] * mu[j][k] * bstar_sq[k];
            }
            mu[i][j] = proj / bstar_sq[j];
            bi_sq -= mu[i][j] * mu[i][j] * bstar_sq[j];
        }
        bstar_sq[i] = bi_sq;
    }
    (mu, bstar_sq)
}

/// Flip a vector so its first nonzero entry is positive.
fn canonical_sign(v: &mut [i64]) {
    if let Some(&first) = v.iter().find(|&&x| x != 0) {
        if first < 0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }
}

/// LLL reduction of the lattice generated by the rows of `factor`.
///
/// Returns the unimodular integer matrix whose rows, in order, satisfy the
/// size-reduction and Lovász conditions with parameter `delta` in the
/// `‖·‖_F` norm. Row signs are normalized so the first nonzero entry of each
/// row is positive, which fixes tie-breaking and keeps output deterministic.
pub fn lll_reduce(factor: &Matrix, delta: f64) -> Result<ReductionResult, LatticeError> {
    assert!(delta > 0.25 && delta <= 1.0, "delta must lie in (0.25, 1]");
    let g = gram_of(factor)?;
    let m = factor.rows();
    let mut basis: Vec<Vec<i64>> = (0..m)
        .map(|i| {
            let mut e = vec![0i64; m];
            e[i] = 1;
            e
        })
        .collect();

    let mut k = 1usize;
    let mut guard = 0usize;
    let guard_max = 100_000;
    while k < m {
        guard += 1;
        if guard > guard_max {
            break;
        }
        // Size-reduce basis[k] against earlier rows, refreshing mu each time.
        for j in (0..k).rev() {
            let (mu, _) = gram_schmidt(&g, &basis);
            let q = math::round(mu[k][j]) as i64;
            if q != 0 {
                let bj = basis[j].clone();
                for (x, &y) in basis[k].iter_mut().zip(&bj) {
                    *x -= q * y;
                }
            }
        }
        let (mu, bstar_sq) = gram_schmidt(&g, &basis);
        if bstar_sq[k] >= (delta - mu[k][k - 1] * mu[k][k - 1]) * bstar_sq[k - 1] {
            k += 1;
        } else {
            basis.swap(k, k - 1);
            k = k.max(2) - 1;
        }
    }

    for row in basis.iter_mut() {
        canonical_sign(row);
    }
    let norms: Vec<f64> = basis
        .iter()
        .map(|a| math::sqrt(gram_dot(&g, a, a)))
        .collect();
    let flat: Vec<i64> = basis.into_iter().flatten().collect();
    Ok(ReductionResult {
        reduced_basis: IntegerMatrix::new(m, m, flat),
        norms,
        delta,
    })
}

/// Full-rank integer coefficient matrix whose rows are LLL-reduced candidates
/// in increasing `‖·‖_F` norm.
///
/// Equal-norm candidates are ordered lexicographically with the first nonzero
/// entry positive, so identical inputs yield bit-identical outputs. With
/// `require_fullrank_prefixes` set, a candidate row is skipped whenever adding
/// it would break exact full rank of the leading block (which cannot happen
/// for rows of a unimodular matrix, but the contract is checked).
pub fn select_coefficient_matrix(
    factor: &Matrix,
    n_rows: usize,
    require_fullrank_prefixes: bool,
) -> Result<IntegerMatrix, LatticeError> {
    let reduced = lll_reduce(factor, DEFAULT_DELTA)?;
    let m = reduced.reduced_basis.rows();
    assert!(n_rows <= m, "cannot select more rows than the dimension");
    let mut candidates: Vec<(f64, Vec<i64>)> = (0..m)
        .map(|i| (reduced.norms[i], reduced.reduced_basis.row(i).to_vec()))
        .collect();
    candidates.sort_by(|(na, va), (nb, vb)| na.partial_cmp(nb).unwrap().then_with(|| va.cmp(vb)));

    let mut chosen: Vec<Vec<i64>> = Vec::with_capacity(n_rows);
    for (_, cand) in candidates {
        if chosen.len() == n_rows {
            break;
        }
        if require_fullrank_prefixes {
            let mut stack: Vec<i64> = chosen.iter().flatten().copied().collect();
            stack.extend_from_slice(&cand);
            let trial = IntegerMatrix::new(chosen.len() + 1, m, stack);
            if trial.rank() != chosen.len() + 1 {
                continue;
            }
        }
        chosen.push(cand);
    }
    if chosen.len() < n_rows {
        return Err(LatticeError::SelectionFailed);
    }
    let flat: Vec<i64> = chosen.into_iter().flatten().collect();
    Ok(IntegerMatrix::new(n_rows, m, flat))
}

/// Exact shortest independent vectors by exhaustive enumeration; the oracle
/// for small instances.
///
/// Enumerates every `a` with `‖a‖_∞ <= coeff_bound`, greedily keeping vectors
/// of minimal `‖·‖_F` norm that preserve full rank. Only practical for
/// dimension at most 4 and bounds at most 10.
pub fn brute_force_shortest(
    factor: &Matrix,
    n_rows: usize,
    coeff_bound: i64,
) -> Result<IntegerMatrix, LatticeError> {
    let m = factor.rows();
    if m > 4 || coeff_bound > 10 {
        return Err(LatticeError::TooLarge);
    }
    assert!(coeff_bound >= 1, "coefficient bound must be at least 1");
    assert!(n_rows <= m, "cannot select more rows than the dimension");
    let g = gram_of(factor)?;

    let mut candidates: Vec<(f64, Vec<i64>)> = Vec::new();
    let mut v = vec![-coeff_bound; m];
    'outer: loop {
        if v.iter().any(|&x| x != 0) {
            let mut c = v.clone();
            canonical_sign(&mut c);
            // Only keep the canonical representative of {a, -a}.
            if c == v {
                candidates.push((gram_dot(&g, &c, &c), c));
            }
        }
        for i in (0..m).rev() {
            if v[i] < coeff_bound {
                v[i] += 1;
                continue 'outer;
            }
            v[i] = -coeff_bound;
        }
        break;
    }
    candidates.sort_by(|(na, va), (nb, vb)| na.partial_cmp(nb).unwrap().then_with(|| va.cmp(vb)));

    let mut chosen: Vec<Vec<i64>> = Vec::with_capacity(n_rows);
    for (_, cand) in candidates {
        if chosen.len() == n_rows {
            break;
        }
        let mut stack: Vec<i64> = chosen.iter().flatten().copied().collect();
        stack.extend_from_slice(&cand);
        let trial = IntegerMatrix::new(chosen.len() + 1, m, stack);
        if trial.rank() == chosen.len() + 1 {
            chosen.push(cand);
        }
    }
    if chosen.len() < n_rows {
        return Err(LatticeError::SelectionFailed);
    }
    let flat: Vec<i64> = chosen.into_iter().flatten().collect();
    Ok(IntegerMatrix::new(n_rows, m, flat))
}

/// `‖a‖_F²` for a coefficient row under a factor, shared by tests and callers.
pub fn factor_norm_sq(factor: &Matrix, a: &[i64]) -> f64 {
    let g = factor.mul(&factor.transpose());
    gram_dot(&g, a, a)
}
