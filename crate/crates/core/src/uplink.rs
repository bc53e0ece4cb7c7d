//! Uplink phase: lattice-compressed observations are forwarded over the
//! fronthaul and the BBU pool decodes integer combinations of user-pair
//! codewords.
//!
//! The achievable quantities are driven by two covariance structures. The
//! compression side sees `H·B·P·Bᵀ·Hᵀ + I + D` at each RRH; dividing by the
//! distortion `d` gives the quadratic form whose value (in bits) must fit the
//! fronthaul capacity. The computation side sees the effective-noise matrix
//! `Φ = (P⁻¹ + (HB)ᵀ(I+D)⁻¹(HB))⁻¹`; decoding a combination with pair
//! coefficients `a` leaves noise power `aᵀ·W·Φ·Wᵀ·a`.
//!
//! The iterative optimizer alternates two sub-steps: bisection on a common
//! distortion level (re-selecting the integer matrices each step) and a
//! log-barrier update of the diagonal precoder with the integer matrices and
//! distortion frozen.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::lattice::{self, LatticeError};
use crate::math;
use crate::numerics::{
    barrier_newton, cholesky, solve_spd, IntegerMatrix, Matrix, NumericsError,
};
use crate::system::{make_adjacent_pairing, PairingMatrix, SystemConfig};

/// Distortion cap for the feasibility search.
const DELTA_CAP: f64 = 1e12;
/// Bisection iteration bound; the interval collapses to float resolution
/// long before this.
const MAX_BISECT: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UplinkError {
    /// No distortion level up to the cap keeps every compression rate within
    /// its fronthaul capacity.
    InitializationFailed,
    Numerics(NumericsError),
    Lattice(LatticeError),
}

impl fmt::Display for UplinkError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InitializationFailed => {
                write!(f, "no feasible distortion level up to the cap")
            }
            Self::Numerics(e) => write!(f, "numerics failure: {e}"),
            Self::Lattice(e) => write!(f, "lattice failure: {e}"),
        }
    }
}

impl core::error::Error for UplinkError {}

impl From<NumericsError> for UplinkError {
    fn from(e: NumericsError) -> Self {
        Self::Numerics(e)
    }
}

impl From<LatticeError> for UplinkError {
    fn from(e: LatticeError) -> Self {
        Self::Lattice(e)
    }
}

/// Outcome of the uplink optimization for one channel realization.
#[derive(Debug, Clone)]
pub struct UplinkSolution {
    /// K×K diagonal scaling matrix.
    pub b_ul: Matrix,
    /// Common distortion level across RRHs.
    pub d_ul: f64,
    /// L×L distortion covariance, `d_ul · I`.
    pub d_matrix: Matrix,
    /// L×L integer matrix for the compression-side combinations; full rank
    /// with full-rank leading blocks.
    pub a_r: IntegerMatrix,
    /// M×M integer matrix for the pair-codeword combinations; full rank.
    pub a_psi: IntegerMatrix,
    /// Compression rate per RRH at `d_ul`.
    pub compression_rates: Vec<f64>,
    /// Computation rate per user (paired users receive equal rates).
    pub user_rates: Vec<f64>,
    /// Effective noise power per combination.
    pub sigma_sq: Vec<f64>,
}

impl UplinkSolution {
    pub fn sum_rate(&self) -> f64 {
        self.user_rates.iter().sum()
    }

    /// Validates the solution invariants against its configuration.
    pub fn check(&self, config: &SystemConfig) -> Result<(), &'static str> {
        let (l, k, m) = (config.num_rrh, config.num_users, config.num_pairs());
        let p = config.coding_power();
        if !self.b_ul.is_square() || self.b_ul.rows() != k {
            return Err("B must be K x K");
        }
        for i in 0..k {
            for j in 0..k {
                if i != j && self.b_ul[(i, j)] != 0.0 {
                    return Err("B must be diagonal");
                }
            }
            let bk = self.b_ul[(i, i)];
            if bk * bk * p > config.uplink_power_limits[i] * (1.0 + 1e-9) {
                return Err("per-user power limit violated");
            }
        }
        if !(self.d_ul > 0.0) {
            return Err("distortion must be positive");
        }
        if self.a_r.rank() != l {
            return Err("compression coefficient matrix must be full rank");
        }
        for prefix in 1..=l {
            let stack: Vec<i64> = (0..prefix).flat_map(|i| self.a_r.row(i).to_vec()).collect();
            if IntegerMatrix::new(prefix, l, stack).rank() != prefix {
                return Err("compression coefficient prefixes must be full rank");
            }
        }
        if self.a_psi.rank() != m {
            return Err("pair coefficient matrix must be full rank");
        }
        for (ell, &r) in self.compression_rates.iter().enumerate() {
            if r > config.fronthaul_capacity[ell] + 1e-9 {
                return Err("compression rate exceeds fronthaul capacity");
            }
        }
        if self.user_rates.iter().any(|&r| r < 0.0) {
            return Err("rates must be non-negative");
        }
        Ok(())
    }
}

/// Compression rate `½·log2⁺(aᵀ(H·B·P·Bᵀ·Hᵀ + I + D)a / d_ell)` at one RRH.
pub fn uplink_compression_rate(
    a: &[i64],
    h: &Matrix,
    b_ul: &Matrix,
    p_ul: f64,
    d_cov: &Matrix,
    d_ell: f64,
) -> f64 {
    assert!(d_ell > 0.0, "distortion must be positive");
    let cov = compression_covariance(h, b_ul, p_ul, d_cov);
    let af: Vec<f64> = a.iter().map(|&x| x as f64).collect();
    0.5 * math::log2_plus(cov.qform(&af) / d_ell)
}

fn compression_covariance(h: &Matrix, b_ul: &Matrix, p_ul: f64, d_cov: &Matrix) -> Matrix {
    let g = h.mul(b_ul);
    let l = h.rows();
    let mut cov = g.mul(&g.transpose()).scale(p_ul).add(d_cov);
    for i in 0..l {
        cov[(i, i)] += 1.0;
    }
    cov
}

/// Lower-triangular `F` with `F·Fᵀ = (P⁻¹ + (HB)ᵀ(I+D)⁻¹(HB))⁻¹`, the
/// effective-noise covariance factor of the computation step.
pub fn effective_noise_factor(h: &Matrix, b_ul: &Matrix, p_ul: f64, d_cov: &Matrix) -> Matrix {
    assert!(p_ul > 0.0, "coding power must be positive");
    let phi = effective_noise_covariance(h, b_ul, p_ul, d_cov);
    cholesky(&phi).expect("effective-noise covariance is SPD for positive coding power")
}

fn effective_noise_covariance(h: &Matrix, b_ul: &Matrix, p_ul: f64, d_cov: &Matrix) -> Matrix {
    let g = h.mul(b_ul);
    let (l, k) = (g.rows(), g.cols());
    // Gᵀ (I+D)⁻¹ G, exploiting the diagonal noise-plus-distortion covariance.
    let mut inner = Matrix::zeros(k, k);
    for ell in 0..l {
        let w = 1.0 / (1.0 + d_cov[(ell, ell)]);
        let row = g.row(ell);
        for i in 0..k {
            if row[i] == 0.0 {
                continue;
            }
            let wi = w * row[i];
            for j in 0..k {
                inner[(i, j)] += wi * row[j];
            }
        }
    }
    for i in 0..k {
        inner[(i, i)] += 1.0 / p_ul;
    }
    solve_spd(&inner.symmetrized(), &Matrix::identity(k))
        .expect("P⁻¹ + GᵀΣ⁻¹G is SPD for positive coding power")
        .symmetrized()
}

/// MMSE scaling equalizer `ρᵀ = aᵀW·P·(HB)ᵀ(HB·P·(HB)ᵀ + I + D)⁻¹` for one
/// pair combination.
pub fn mmse_equalizer_ul(
    a_psi_row: &[i64],
    w: &IntegerMatrix,
    h: &Matrix,
    b_ul: &Matrix,
    p_ul: f64,
    d_cov: &Matrix,
) -> Vec<f64> {
    let g = h.mul(b_ul);
    let cov = compression_covariance(h, b_ul, p_ul, d_cov);
    let wa = pair_expansion(w, a_psi_row);
    let rhs: Vec<f64> = g.mul_vec(&wa).iter().map(|x| x * p_ul).collect();
    let sol = solve_spd(&cov.symmetrized(), &Matrix::column(&rhs))
        .expect("receive covariance is SPD");
    sol.col(0)
}

/// `Wᵀ·a` as a real vector: the per-user expansion of pair coefficients.
fn pair_expansion(w: &IntegerMatrix, a: &[i64]) -> Vec<f64> {
    assert_eq!(w.rows(), a.len(), "coefficient count must match pair count");
    let k = w.cols();
    let mut out = vec![0.0; k];
    for (m, &am) in a.iter().enumerate() {
        if am == 0 {
            continue;
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o += (am * w[(m, j)]) as f64;
        }
    }
    out
}

/// Effective noise power of a combination through the Cholesky form:
/// `‖F_ψᵀ·Wᵀ·a‖² = aᵀ·W·(F_ψF_ψᵀ)·Wᵀ·a`.
pub fn uplink_sigma_sq(a_psi_row: &[i64], f_psi: &Matrix, w: &IntegerMatrix) -> f64 {
    let wa = pair_expansion(w, a_psi_row);
    let y = f_psi.vec_mul(&wa); // Fᵀ·(Wᵀa) read row-wise
    math::hypot_sq(&y)
}

/// Effective noise power evaluated directly from its definition,
/// `‖(ρᵀHB − aᵀW)P^{1/2}‖² + ρᵀ(I+D)ρ`, at an arbitrary equalizer `ρ`.
///
/// At the MMSE equalizer this equals [`uplink_sigma_sq`]; the two routes are
/// algebraically independent and cross-checked in the test suite.
pub fn uplink_sigma_sq_direct(
    a_psi_row: &[i64],
    w: &IntegerMatrix,
    h: &Matrix,
    b_ul: &Matrix,
    p_ul: f64,
    d_cov: &Matrix,
    rho: &[f64],
) -> f64 {
    let g = h.mul(b_ul);
    let wa = pair_expansion(w, a_psi_row);
    let gt_rho = g.vec_mul(rho);
    let mismatch: f64 = gt_rho
        .iter()
        .zip(&wa)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let noise: f64 = rho
        .iter()
        .enumerate()
        .map(|(ell, &r)| r * r * (1.0 + d_cov[(ell, ell)]))
        .sum();
    p_ul * mismatch + noise
}

/// Per-user computation rates: user `k` in pair `m` gets the worst rate over
/// all combinations whose `m`-th coefficient is nonzero.
pub fn uplink_user_rates(
    a_psi: &IntegerMatrix,
    f_psi: &Matrix,
    w: &PairingMatrix,
    p_ul: f64,
) -> Vec<f64> {
    let sigma: Vec<f64> = (0..a_psi.rows())
        .map(|j| uplink_sigma_sq(a_psi.row(j), f_psi, w.matrix()))
        .collect();
    user_rates_from_sigma(a_psi, &sigma, w, p_ul)
}

fn user_rates_from_sigma(
    a_psi: &IntegerMatrix,
    sigma_sq: &[f64],
    w: &PairingMatrix,
    p_ul: f64,
) -> Vec<f64> {
    let k = w.num_users();
    (0..k)
        .map(|user| {
            let m = w.pair_of(user);
            let mut rate = f64::INFINITY;
            for j in 0..a_psi.rows() {
                if a_psi[(j, m)] != 0 {
                    rate = rate.min(0.5 * math::log2_plus(p_ul / sigma_sq[j]));
                }
            }
            // Full rank guarantees some combination touches every pair.
            assert!(rate.is_finite(), "no combination involves pair {m}");
            rate
        })
        .collect()
}

/// Individual-codeword reference: decode K combinations of single-user
/// codewords from the same effective-noise factor, no pairing structure.
pub fn baseline_individual_rates(f_psi: &Matrix, p_ul: f64) -> Result<Vec<f64>, UplinkError> {
    let k = f_psi.rows();
    let a = lattice::select_coefficient_matrix(f_psi, k, true)?;
    let sigma: Vec<f64> = (0..k)
        .map(|j| lattice::factor_norm_sq(f_psi, a.row(j)))
        .collect();
    Ok((0..k)
        .map(|user| {
            let mut rate = f64::INFINITY;
            for j in 0..k {
                if a[(j, user)] != 0 {
                    rate = rate.min(0.5 * math::log2_plus(p_ul / sigma[j]));
                }
            }
            assert!(rate.is_finite(), "no combination involves user {user}");
            rate
        })
        .collect())
}

/// Compression-side state at one distortion level.
#[derive(Clone)]
struct DistortionEval {
    a_r: IntegerMatrix,
    rates: Vec<f64>,
}

fn evaluate_distortion(
    channel_gram: &Matrix,
    d: f64,
    num_rrh: usize,
) -> Result<DistortionEval, UplinkError> {
    // (1/d)·HBPBᵀHᵀ + (1/d + 1)·I is the Gram matrix of the compression form;
    // its Cholesky factor drives the coefficient selection.
    let mut gram = channel_gram.scale(1.0 / d);
    for i in 0..num_rrh {
        gram[(i, i)] += 1.0 / d + 1.0;
    }
    let f_r = cholesky(&gram)?;
    let a_r = lattice::select_coefficient_matrix(&f_r, num_rrh, true)?;
    // Rates are evaluated through the covariance form so the feasibility
    // decisions and the reported values share one arithmetic path.
    let mut cov = channel_gram.clone();
    for i in 0..num_rrh {
        cov[(i, i)] += 1.0 + d;
    }
    let rates: Vec<f64> = (0..num_rrh)
        .map(|ell| {
            let af: Vec<f64> = a_r.row(ell).iter().map(|&x| x as f64).collect();
            0.5 * math::log2_plus(cov.qform(&af) / d)
        })
        .collect();
    Ok(DistortionEval { a_r, rates })
}

fn max_violation(rates: &[f64], capacity: &[f64]) -> f64 {
    rates
        .iter()
        .zip(capacity)
        .map(|(r, c)| r - c)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn max_slack(rates: &[f64], capacity: &[f64]) -> f64 {
    rates
        .iter()
        .zip(capacity)
        .map(|(r, c)| c - r)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Iterative uplink optimization for a fixed precoder: bisect the common
/// distortion level until the fronthaul constraints are tight, re-selecting
/// the compression coefficients each step, then pick the pair coefficients
/// and compute rates.
///
/// Bisection keeps the last feasible state: midpoints that violate a capacity
/// raise the lower bracket, feasible ones lower the upper bracket. The loop
/// stops early when every capacity is matched within `eps`; otherwise it runs
/// until the bracket collapses, leaving the binding constraint tight at float
/// resolution.
pub fn iuo(
    config: &SystemConfig,
    h: &Matrix,
    b_ul: &Matrix,
) -> Result<UplinkSolution, UplinkError> {
    let l = config.num_rrh;
    let p = config.coding_power();
    let capacity = &config.fronthaul_capacity;
    let g = h.mul(b_ul);
    let channel_gram = g.mul(&g.transpose()).scale(p).symmetrized();

    // Feasibility search: grow the distortion until nothing violates.
    let mut delta = 1.0;
    let mut eval = evaluate_distortion(&channel_gram, delta, l)?;
    while max_violation(&eval.rates, capacity) > 0.0 && delta < DELTA_CAP {
        delta = (delta * 10.0).min(DELTA_CAP);
        eval = evaluate_distortion(&channel_gram, delta, l)?;
    }
    let cap_violation = max_violation(&eval.rates, capacity);
    if cap_violation > config.eps {
        return Err(UplinkError::InitializationFailed);
    }
    let (mut d, mut best) = (delta, (delta, eval));
    if cap_violation <= 0.0 {
        // Bisect between zero distortion and the feasible cap.
        let (mut d_min, mut d_max) = (0.0f64, delta);
        let mut current = best.1.clone();
        for _ in 0..MAX_BISECT {
            let violation = max_violation(&current.rates, capacity) > 0.0;
            if !violation {
                best = (d, current.clone());
                if max_slack(&current.rates, capacity) <= config.eps {
                    break;
                }
                d_max = d;
            } else {
                d_min = d;
            }
            if (d_max - d_min) <= 1e-15 * d_max {
                break;
            }
            d = 0.5 * (d_min + d_max);
            current = evaluate_distortion(&channel_gram, d, l)?;
        }
    }
    let (d_ul, eval) = best;

    finalize_solution(config, h, b_ul, d_ul, eval.a_r, eval.rates, p)
}

fn finalize_solution(
    config: &SystemConfig,
    h: &Matrix,
    b_ul: &Matrix,
    d_ul: f64,
    a_r: IntegerMatrix,
    compression_rates: Vec<f64>,
    p: f64,
) -> Result<UplinkSolution, UplinkError> {
    let l = config.num_rrh;
    let m = config.num_pairs();
    let pairing = make_adjacent_pairing(m);
    let d_matrix = Matrix::from_diag(&vec![d_ul; l]);

    let f_psi = effective_noise_factor(h, b_ul, p, &d_matrix);
    // Pair-combination lattice factor: (W·F)(W·F)ᵀ = W·Φ·Wᵀ.
    let pair_factor = pairing.matrix().to_real().mul(&f_psi);
    let a_psi = lattice::select_coefficient_matrix(&pair_factor, m, false)?;

    let sigma_sq: Vec<f64> = (0..m)
        .map(|j| uplink_sigma_sq(a_psi.row(j), &f_psi, pairing.matrix()))
        .collect();
    let user_rates = user_rates_from_sigma(&a_psi, &sigma_sq, &pairing, p);

    Ok(UplinkSolution {
        b_ul: b_ul.clone(),
        d_ul,
        d_matrix,
        a_r,
        a_psi,
        compression_rates,
        user_rates,
        sigma_sq,
    })
}

/// Barrier update of the diagonal precoder with the integer matrices and
/// distortion held fixed: maximize the sum of user rates subject to the K
/// per-user power limits and L fronthaul capacities.
pub fn update_precoder(
    config: &SystemConfig,
    h: &Matrix,
    solution: &UplinkSolution,
) -> Result<Matrix, UplinkError> {
    let k = config.num_users;
    let l = config.num_rrh;
    let m = config.num_pairs();
    let p = config.coding_power();
    let d = solution.d_ul;
    let pairing = make_adjacent_pairing(m);
    let capacity = config.fronthaul_capacity.clone();
    let power = config.uplink_power_limits.clone();
    let a_r = solution.a_r.clone();
    let a_psi = solution.a_psi.clone();
    let w = pairing.clone();
    let h_own = h.clone();

    let rates_of = {
        let h = h_own.clone();
        let w = w.clone();
        let a_psi = a_psi.clone();
        move |x: &[f64]| -> Vec<f64> {
            let b = Matrix::from_diag(x);
            let d_cov = Matrix::from_diag(&vec![d; l]);
            let f_psi = effective_noise_factor(&h, &b, p, &d_cov);
            uplink_user_rates(&a_psi, &f_psi, &w, p)
        }
    };
    let objective = {
        let rates_of = rates_of.clone();
        move |x: &[f64]| -> f64 { -rates_of(x).iter().sum::<f64>() }
    };
    let constraints = {
        let h = h_own.clone();
        let a_r = a_r.clone();
        let power = power.clone();
        let capacity = capacity.clone();
        move |x: &[f64]| -> Vec<f64> {
            let b = Matrix::from_diag(x);
            let d_cov = Matrix::from_diag(&vec![d; l]);
            let mut g = Vec::with_capacity(k + l);
            for (i, &xi) in x.iter().enumerate() {
                g.push(xi * xi * p - power[i]);
            }
            for ell in 0..l {
                g.push(
                    uplink_compression_rate(a_r.row(ell), &h, &b, p, &d_cov, d) - capacity[ell],
                );
            }
            g
        }
    };

    // The incoming precoder sits on the power boundary; pull it inside until
    // every constraint is strictly negative.
    let x_init: Vec<f64> = solution.b_ul.diag();
    let mut x0 = None;
    for shrink in [1.0, 1.0 - 1e-9, 1.0 - 1e-6, 1.0 - 1e-3, 0.99, 0.9, 0.7, 0.5, 0.25, 0.1] {
        let cand: Vec<f64> = x_init.iter().map(|&v| v * shrink).collect();
        if constraints(&cand).iter().all(|&gi| gi < 0.0) {
            x0 = Some(cand);
            break;
        }
    }
    let Some(x0) = x0 else {
        return Err(UplinkError::Numerics(NumericsError::InfeasibleStart));
    };

    let (x_opt, _report) = barrier_newton(objective, constraints, &x0, 1.0, 10.0, config.eps)?;
    Ok(Matrix::from_diag(&x_opt))
}

/// Full uplink optimization: alternate distortion bisection and precoder
/// updates from the full-power start, keeping the best solution seen.
pub fn optimize_uplink(config: &SystemConfig, h: &Matrix) -> Result<UplinkSolution, UplinkError> {
    let p = config.coding_power();
    let b0: Vec<f64> = config
        .uplink_power_limits
        .iter()
        .map(|&pk| math::sqrt(pk / p))
        .collect();
    let mut current = iuo(config, h, &Matrix::from_diag(&b0))?;
    let mut best = current.clone();
    let mut prev_sum = current.sum_rate();

    for _ in 1..config.max_outer_iters {
        let b_new = match update_precoder(config, h, &current) {
            Ok(b) => b,
            // The alternation is a refinement loop; when no strictly interior
            // start exists the incumbent stands.
            Err(UplinkError::Numerics(NumericsError::InfeasibleStart)) => break,
            Err(e) => return Err(e),
        };
        current = iuo(config, h, &b_new)?;
        let sum = current.sum_rate();
        if sum > best.sum_rate() {
            best = current.clone();
        }
        if math::abs(sum - prev_sum) < 1e-4 * prev_sum.max(1.0) {
            break;
        }
        prev_sum = sum;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn zero_matrix(rows: usize, cols: usize) -> Matrix {
        Matrix::zeros(rows, cols)
    }

    #[test]
    fn compression_rate_noise_only() {
        let h = zero_matrix(2, 4);
        let b = Matrix::identity(4);
        let d0 = Matrix::zeros(2, 2);
        let r = uplink_compression_rate(&[1, 0], &h, &b, 1.0, &d0, 1.0);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn compression_rate_quarter_distortion() {
        let h = zero_matrix(2, 4);
        let b = Matrix::identity(4);
        let d0 = Matrix::zeros(2, 2);
        let r = uplink_compression_rate(&[1, 0], &h, &b, 1.0, &d0, 0.25);
        assert_close(r, 1.0, 1e-12);
    }

    #[test]
    fn compression_rate_scalar_chain() {
        // L = K = 1, h = b = p = 1, D = [1], a = [1], d = 1: numerator 3.
        let h = Matrix::from_rows(&[&[1.0]]);
        let b = Matrix::identity(1);
        let d = Matrix::from_rows(&[&[1.0]]);
        let r = uplink_compression_rate(&[1], &h, &b, 1.0, &d, 1.0);
        assert_close(r, 0.5 * math::log2(3.0), 1e-12);
    }

    #[test]
    fn noise_factor_zero_channel_gives_coding_power() {
        let h = zero_matrix(2, 4);
        let b = Matrix::identity(4);
        let p = 3.7;
        let f = effective_noise_factor(&h, &b, p, &Matrix::zeros(2, 2));
        let phi = f.mul(&f.transpose());
        let expect = Matrix::identity(4).scale(p);
        assert!(phi.sub(&expect).frobenius_norm() <= 1e-9);
    }

    #[test]
    fn noise_factor_scalar_half() {
        let h = Matrix::from_rows(&[&[1.0]]);
        let b = Matrix::identity(1);
        let f = effective_noise_factor(&h, &b, 1.0, &Matrix::zeros(1, 1));
        assert_close(f[(0, 0)] * f[(0, 0)], 0.5, 1e-12);
    }

    #[test]
    fn noise_factor_infinite_distortion_limit() {
        let h = Matrix::from_rows(&[&[1.0, -0.5], &[0.3, 2.0]]);
        let b = Matrix::identity(2);
        let p = 2.0;
        let d = Matrix::from_diag(&[1e8, 1e8]);
        let f = effective_noise_factor(&h, &b, p, &d);
        let phi = f.mul(&f.transpose());
        let expect = Matrix::identity(2).scale(p);
        assert!(phi.sub(&expect).frobenius_norm() <= 1e-6);
    }

    #[test]
    fn mmse_zero_channel_is_zero() {
        let h = zero_matrix(2, 2);
        let b = Matrix::identity(2);
        let w = IntegerMatrix::from_rows(&[&[1, 1]]);
        let rho = mmse_equalizer_ul(&[1], &w, &h, &b, 1.0, &Matrix::zeros(2, 2));
        assert!(rho.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn mmse_scalar_half() {
        let h = Matrix::from_rows(&[&[1.0]]);
        let b = Matrix::identity(1);
        let w = IntegerMatrix::identity(1);
        let rho = mmse_equalizer_ul(&[1], &w, &h, &b, 1.0, &Matrix::zeros(1, 1));
        assert_close(rho[0], 0.5, 1e-12);
    }

    #[test]
    fn mmse_zero_coefficients_zero_equalizer() {
        let h = Matrix::from_rows(&[&[1.0, 0.2], &[0.1, -1.0]]);
        let b = Matrix::identity(2);
        let w = IntegerMatrix::from_rows(&[&[1, 1]]);
        let rho = mmse_equalizer_ul(&[0], &w, &h, &b, 1.0, &Matrix::zeros(2, 2));
        assert!(rho.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sigma_sq_zero_combination() {
        let f = Matrix::identity(2);
        let w = IntegerMatrix::identity(2);
        assert_eq!(uplink_sigma_sq(&[0, 0], &f, &w), 0.0);
    }

    #[test]
    fn sigma_sq_scalar_matches_direct_route() {
        // Scalar case: F² = 0.5, W = [1], a = [1]; the direct evaluation at
        // the MMSE equalizer must agree.
        let h = Matrix::from_rows(&[&[1.0]]);
        let b = Matrix::identity(1);
        let w = IntegerMatrix::identity(1);
        let d = Matrix::zeros(1, 1);
        let f = effective_noise_factor(&h, &b, 1.0, &d);
        let s = uplink_sigma_sq(&[1], &f, &w);
        assert_close(s, 0.5, 1e-12);
        let rho = mmse_equalizer_ul(&[1], &w, &h, &b, 1.0, &d);
        let direct = uplink_sigma_sq_direct(&[1], &w, &h, &b, 1.0, &d, &rho);
        assert_close(s, direct, 1e-12);
    }

    #[test]
    fn sigma_sq_unit_vector() {
        let f = Matrix::identity(2);
        let w = IntegerMatrix::identity(2);
        assert_eq!(uplink_sigma_sq(&[1, 0], &f, &w), 1.0);
    }

    fn random_instance(
        rng: &mut ChaCha8Rng,
        l: usize,
        m: usize,
    ) -> (Matrix, Matrix, Matrix, PairingMatrix, Vec<i64>, f64) {
        let k = 2 * m;
        let h = Matrix::new(l, k, (0..l * k).map(|_| rng.gen_range(-2.0..2.0)).collect());
        let b = Matrix::from_diag(&(0..k).map(|_| rng.gen_range(0.2..2.0)).collect::<Vec<_>>());
        let d = Matrix::from_diag(&(0..l).map(|_| rng.gen_range(0.0..3.0)).collect::<Vec<_>>());
        let w = make_adjacent_pairing(m);
        let a: Vec<i64> = (0..m).map(|_| rng.gen_range(-3..=3)).collect();
        let p = rng.gen_range(0.5..10.0);
        (h, b, d, w, a, p)
    }

    #[test]
    fn dual_form_identity_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut checked = 0;
        while checked < 1000 {
            let l = rng.gen_range(1..=3);
            let m = rng.gen_range(1..=3);
            let (h, b, d, w, a, p) = random_instance(&mut rng, l, m);
            if a.iter().all(|&x| x == 0) {
                continue;
            }
            let f = effective_noise_factor(&h, &b, p, &d);
            let chol_route = uplink_sigma_sq(&a, &f, w.matrix());
            let rho = mmse_equalizer_ul(&a, w.matrix(), &h, &b, p, &d);
            let direct = uplink_sigma_sq_direct(&a, w.matrix(), &h, &b, p, &d, &rho);
            let scale = chol_route.max(direct).max(1e-300);
            assert!(
                (chol_route - direct).abs() / scale <= 1e-9,
                "dual-form mismatch: {chol_route} vs {direct}"
            );
            checked += 1;
        }
    }

    #[test]
    fn mmse_is_locally_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..200 {
            let l = rng.gen_range(1..=3);
            let m = rng.gen_range(1..=2);
            let (h, b, d, w, a, p) = random_instance(&mut rng, l, m);
            let rho = mmse_equalizer_ul(&a, w.matrix(), &h, &b, p, &d);
            let base = uplink_sigma_sq_direct(&a, w.matrix(), &h, &b, p, &d, &rho);
            for i in 0..rho.len() {
                for delta in [-1e-3, 1e-3] {
                    let mut pert = rho.clone();
                    pert[i] += delta;
                    let v = uplink_sigma_sq_direct(&a, w.matrix(), &h, &b, p, &d, &pert);
                    assert!(v >= base - 1e-12, "perturbation improved sigma: {v} < {base}");
                }
            }
        }
    }

    #[test]
    fn user_rates_clamp_to_zero() {
        let w = make_adjacent_pairing(1);
        let a = IntegerMatrix::identity(1);
        // sigma >= p everywhere: rates must clamp at zero.
        let f = Matrix::identity(2).scale(2.0);
        let rates = uplink_user_rates(&a, &f, &w, 1.0);
        assert_eq!(rates, vec![0.0, 0.0]);
    }

    #[test]
    fn user_rates_single_pair() {
        // sigma^2 = 0.5 with p = 1: both users get 1/2 bit.
        let w = make_adjacent_pairing(1);
        let a = IntegerMatrix::identity(1);
        let f = Matrix::from_diag(&[0.5, 0.5]).scale(1.0);
        // W (F Fᵀ) Wᵀ for W = [1,1] gives 0.5; build F so that holds:
        // F = diag(0.5, 0.5) => Phi = diag(0.25), WΦWᵀ = 0.5.
        let rates = uplink_user_rates(&a, &f, &w, 1.0);
        assert_close(rates[0], 0.5, 1e-12);
        assert_eq!(rates[0], rates[1]);
    }

    #[test]
    fn user_rates_diagonal_combinations() {
        // With diagonal pair coefficients the pairs decouple: sigma f
        // (0.5, 0.125) and p = 1 give rates (0.5, 1.5).
        let w = make_adjacent_pairing(2);
        let a = IntegerMatrix::identity(2);
        let rates = user_rates_from_sigma(&a, &[0.5, 0.125], &w, 1.0);
        assert_close(rates[0], 0.5, 1e-12);
        assert_close(rates[1], 0.5, 1e-12);
        assert_close(rates[2], 1.5, 1e-12);
        assert_close(rates[3], 1.5, 1e-12);
    }

    #[test]
    fn rates_monotone_in_distortion() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..100 {
            let m = 2;
            let k = 2 * m;
            let l = 2;
            let h = Matrix::new(l, k, (0..l * k).map(|_| rng.gen_range(-2.0..2.0)).collect());
            let b = Matrix::identity(k);
            let w = make_adjacent_pairing(m);
            let p = 50.0;
            let d1 = rng.gen_range(0.01..1.0);
            let d2 = d1 * rng.gen_range(1.1..10.0);
            let f1 = effective_noise_factor(&h, &b, p, &Matrix::from_diag(&[d1; 2]));
            let f2 = effective_noise_factor(&h, &b, p, &Matrix::from_diag(&[d2; 2]));
            let a = lattice::select_coefficient_matrix(
                &w.matrix().to_real().mul(&f1),
                m,
                false,
            )
            .unwrap();
            let r1 = uplink_user_rates(&a, &f1, &w, p);
            let r2 = uplink_user_rates(&a, &f2, &w, p);
            for (x, y) in r2.iter().zip(&r1) {
                assert!(*x <= y + 1e-12, "rate rose with distortion: {x} > {y}");
            }
        }
    }

    #[test]
    fn baseline_decoupled_users() {
        // F = c·I: every user decodes its own codeword at ½log2+(p/c²).
        let p = 8.0;
        let c = 1.5;
        let f = Matrix::identity(3).scale(c);
        let rates = baseline_individual_rates(&f, p).unwrap();
        let expect = 0.5 * math::log2_plus(p / (c * c));
        for r in rates {
            assert_close(r, expect, 1e-12);
        }
    }

    #[test]
    fn baseline_matches_brute_force_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..20 {
            let g = Matrix::new(2, 2, (0..4).map(|_| rng.gen_range(-1.5..1.5)).collect());
            let spd = g.transpose().mul(&g).add(&Matrix::identity(2));
            let f = cholesky(&spd).unwrap();
            let p = 30.0;
            let rates = baseline_individual_rates(&f, p).unwrap();
            // Oracle: exhaustive full-rank selection with the same rate rule.
            let a = lattice::brute_force_shortest(&f, 2, 8).unwrap();
            let sigma: Vec<f64> = (0..2)
                .map(|j| lattice::factor_norm_sq(&f, a.row(j)))
                .collect();
            for user in 0..2 {
                let mut expect = f64::INFINITY;
                for j in 0..2 {
                    if a[(j, user)] != 0 {
                        expect = expect.min(0.5 * math::log2_plus(p / sigma[j]));
                    }
                }
                assert_close(rates[user], expect, 1e-9);
            }
        }
    }

    #[test]
    fn baseline_clamps_below_noise() {
        let f = Matrix::identity(2).scale(10.0);
        let rates = baseline_individual_rates(&f, 1.0).unwrap();
        assert!(rates.iter().all(|&r| r == 0.0));
    }

    fn test_config(c: f64) -> SystemConfig {
        SystemConfig::new(2, 4, 35.0, vec![c, c])
    }

    fn full_power_precoder(config: &SystemConfig) -> Matrix {
        let p = config.coding_power();
        Matrix::from_diag(
            &config
                .uplink_power_limits
                .iter()
                .map(|&pk| math::sqrt(pk / p))
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn iuo_generous_capacity_reaches_distortion_free_rates() {
        let config = test_config(50.0);
        let h = crate::system::sample_channel(&config, 1, 0).h_ul;
        let b = full_power_precoder(&config);
        let sol = iuo(&config, &h, &b).unwrap();
        // Distortion-free reference at the same precoder.
        let p = config.coding_power();
        let f0 = effective_noise_factor(&h, &b, p, &Matrix::zeros(2, 2));
        let w = make_adjacent_pairing(2);
        let pair_factor = w.matrix().to_real().mul(&f0);
        let a0 = lattice::select_coefficient_matrix(&pair_factor, 2, false).unwrap();
        let r0 = uplink_user_rates(&a0, &f0, &w, p);
        for (r, r_free) in sol.user_rates.iter().zip(&r0) {
            assert!(
                (r_free - r) / r_free.max(1e-9) <= 0.01,
                "rate {r} more than 1% below distortion-free {r_free}"
            );
        }
    }

    #[test]
    fn iuo_zero_capacity_starves_users() {
        let config = test_config(0.0);
        let h = crate::system::sample_channel(&config, 1, 0).h_ul;
        let b = full_power_precoder(&config);
        let sol = iuo(&config, &h, &b).unwrap();
        assert_eq!(sol.d_ul, DELTA_CAP, "distortion must diverge to the cap");
        assert!(sol.user_rates.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn iuo_fixed_seed_contract() {
        let config = test_config(4.0);
        let h = crate::system::sample_channel(&config, 1, 0).h_ul;
        let b = full_power_precoder(&config);
        let sol = iuo(&config, &h, &b).unwrap();
        // No capacity violated; the binding constraint is tight.
        for (r, c) in sol.compression_rates.iter().zip(&config.fronthaul_capacity) {
            assert!(r <= c, "compression rate {r} exceeds capacity {c}");
        }
        let binding = sol
            .compression_rates
            .iter()
            .zip(&config.fronthaul_capacity)
            .map(|(r, c)| c - r)
            .fold(f64::INFINITY, f64::min);
        assert!(binding <= 1e-6, "binding slack {binding} not tight");
        sol.check(&config).unwrap();
        // Stored rates agree with the public covariance-form evaluation.
        for (ell, &r) in sol.compression_rates.iter().enumerate() {
            let direct = uplink_compression_rate(
                sol.a_r.row(ell),
                &h,
                &b,
                config.coding_power(),
                &sol.d_matrix,
                sol.d_ul,
            );
            assert!((r - direct).abs() <= 1e-9 * direct.max(1.0));
        }
        // Regression snapshot of the converged distortion (bisection is
        // deterministic for a fixed channel).
        let again = iuo(&config, &h, &b).unwrap();
        assert_eq!(sol.d_ul, again.d_ul);
    }

    #[test]
    fn precoder_symmetric_channel_keeps_equal_scalings() {
        // Identical columns and generous fronthaul: power caps bind, so the
        // optimum is the symmetric full-power point.
        let config = test_config(30.0);
        let col = [1.0, 0.5];
        let h = Matrix::from_rows(&[
            &[col[0], col[0], col[0], col[0]],
            &[col[1], col[1], col[1], col[1]],
        ]);
        let b = full_power_precoder(&config);
        let sol = iuo(&config, &h, &b).unwrap();
        let b_new = update_precoder(&config, &h, &sol).unwrap();
        let d = b_new.diag();
        for i in 1..d.len() {
            assert!(
                (d[i] - d[0]).abs() <= 1e-3 * d[0].abs().max(1.0),
                "asymmetric precoder {d:?}"
            );
        }
    }

    #[test]
    fn precoder_pushes_to_power_boundary() {
        let config = SystemConfig::new(1, 2, 20.0, vec![40.0]);
        let h = Matrix::from_rows(&[&[1.0, 0.8]]);
        let b = full_power_precoder(&config);
        let sol = iuo(&config, &h, &b).unwrap();
        let b_new = update_precoder(&config, &h, &sol).unwrap();
        let p = config.coding_power();
        for (i, &bi) in b_new.diag().iter().enumerate() {
            let margin = (bi * bi * p - config.uplink_power_limits[i]).abs();
            assert!(
                margin <= 1e-3 * config.uplink_power_limits[i],
                "scaling {i} not at the power boundary (margin {margin})"
            );
        }
    }

    #[test]
    fn precoder_output_feasible() {
        let config = test_config(4.0);
        for seed in 0..10u64 {
            let h = crate::system::sample_channel(&config, seed, 0).h_ul;
            let b = full_power_precoder(&config);
            let sol = iuo(&config, &h, &b).unwrap();
            let b_new = update_precoder(&config, &h, &sol).unwrap();
            let p = config.coding_power();
            let d_cov = Matrix::from_diag(&[sol.d_ul; 2]);
            for (i, &bi) in b_new.diag().iter().enumerate() {
                assert!(
                    bi * bi * p - config.uplink_power_limits[i] <= 1e-8,
                    "power constraint violated"
                );
            }
            for ell in 0..config.num_rrh {
                let r = uplink_compression_rate(
                    sol.a_r.row(ell),
                    &h,
                    &b_new,
                    p,
                    &d_cov,
                    sol.d_ul,
                );
                assert!(
                    r - config.fronthaul_capacity[ell] <= 1e-8,
                    "fronthaul constraint violated"
                );
            }
        }
    }

    #[test]
    fn optimize_uplink_zero_channel() {
        let config = test_config(4.0);
        let h = Matrix::zeros(2, 4);
        let sol = optimize_uplink(&config, &h).unwrap();
        assert!(sol.user_rates.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn optimize_uplink_best_seen_is_monotone() {
        let config = test_config(4.0);
        let h = crate::system::sample_channel(&config, 3, 0).h_ul;
        // Best-seen selection: the returned solution is at least as good as
        // the first fixed-precoder pass.
        let first = iuo(&config, &h, &full_power_precoder(&config)).unwrap();
        let best = optimize_uplink(&config, &h).unwrap();
        assert!(best.sum_rate() >= first.sum_rate() - 1e-9);
        best.check(&config).unwrap();
    }

    #[test]
    fn pair_rates_are_equal() {
        let config = test_config(4.0);
        for seed in 0..20u64 {
            let h = crate::system::sample_channel(&config, seed, 1).h_ul;
            let sol = iuo(&config, &h, &full_power_precoder(&config)).unwrap();
            let w = make_adjacent_pairing(2);
            for user in 0..4 {
                let partner = w.partner_of(user);
                assert_eq!(sol.user_rates[user], sol.user_rates[partner]);
            }
        }
    }
}
