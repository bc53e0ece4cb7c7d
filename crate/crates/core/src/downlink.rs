//! Downlink phase: the BBU pool beamforms the decoded pair combinations,
//! pre-inverts, quantizes, and each RRH broadcasts its recovered signal; users
//! cancel their own codeword as side information.
//!
//! The downlink distortion levels are pinned by running the compression-rate
//! relation at equality: `2^(2C_ℓ)·d_ℓ - Σ_i a_{ℓi}²·d_i = p·‖b_ℓ‖²` is a
//! linear system in `d` once the beamformer and the integer matrix are fixed.
//! The iterative optimizer then shapes the beamformer so the per-user downlink
//! rates match the uplink ones, restarting from fresh seeded initializations
//! when power feasibility fails.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::distributions::Distribution;
use rand_distr::StandardNormal;

use crate::math;
use crate::numerics::{
    bfgs_minimize, fd_gradient, solve_general, IntegerMatrix, Matrix, OptimizerReport,
    WolfeParams,
};
use crate::system::{derived_rng, make_adjacent_pairing, SystemConfig, STREAM_DOWNLINK_INIT};
use crate::uplink::UplinkSolution;

/// Quadratic penalty weight for downlink power violations inside the
/// beamformer objective.
const POWER_PENALTY: f64 = 1e6;
/// Flat objective value for beamformers whose distortion solve is infeasible.
const INFEASIBLE_OBJECTIVE: f64 = 1e9;
/// Rate-matching tolerance (bits) for accepting a downlink solution early.
const RATE_MATCH_EPS: f64 = 1e-3;
/// Fresh-initialization budget of the iterative downlink optimizer.
const MAX_RESTARTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DownlinkError {
    /// The distortion system is singular or produces a non-positive level;
    /// the capacities are too small for the chosen coefficients/beamformer.
    Infeasible,
    /// The uplink pair-coefficient matrix is not invertible.
    SingularPsi,
    /// No power-feasible beamformer found within the restart budget.
    NoFeasibleSolution,
    DimensionMismatch,
}

impl fmt::Display for DownlinkError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Infeasible => write!(f, "downlink distortion solve is infeasible"),
            Self::SingularPsi => write!(f, "uplink pair coefficient matrix is singular"),
            Self::NoFeasibleSolution => {
                write!(f, "no power-feasible downlink beamformer within the restart budget")
            }
            Self::DimensionMismatch => write!(f, "operand dimensions do not conform"),
        }
    }
}

impl core::error::Error for DownlinkError {}

/// Outcome of the downlink optimization for one channel realization.
#[derive(Debug, Clone)]
pub struct DownlinkSolution {
    /// L×M beamforming matrix.
    pub b_dl: Matrix,
    /// L×L integer matrix of the reverse compression step (transpose of the
    /// uplink one).
    pub a_r_dl: IntegerMatrix,
    /// Per-RRH downlink distortion levels.
    pub d_dl: Vec<f64>,
    /// Per-user MMSE scalars.
    pub rho: Vec<f64>,
    /// Per-user downlink rates.
    pub user_rates: Vec<f64>,
    /// Per-RRH transmit powers.
    pub rrh_powers: Vec<f64>,
    pub report: OptimizerReport,
}

impl DownlinkSolution {
    /// Validates the solution invariants against its configuration.
    pub fn check(&self, config: &SystemConfig, p_ul: f64) -> Result<(), &'static str> {
        if self.d_dl.iter().any(|&d| !(d > 0.0)) {
            return Err("distortion levels must be positive");
        }
        for (ell, &pw) in self.rrh_powers.iter().enumerate() {
            if pw > config.downlink_power_limits[ell] + 1e-8 {
                return Err("per-RRH power limit violated");
            }
        }
        for ell in 0..config.num_rrh {
            let rate = downlink_compression_rate(
                self.b_dl.row(ell),
                self.a_r_dl.row(ell),
                p_ul,
                &self.d_dl,
                self.d_dl[ell],
            );
            if (rate - config.fronthaul_capacity[ell]).abs() > 1e-9 {
                return Err("downlink compression rate must sit at capacity");
            }
        }
        if self.user_rates.iter().any(|&r| r < 0.0) {
            return Err("rates must be non-negative");
        }
        Ok(())
    }
}

/// End-to-end outcome: per-user minimum of the two phases.
#[derive(Debug, Clone)]
pub struct EndToEndResult {
    pub per_user_rate: Vec<f64>,
    pub sum_rate: f64,
    pub uplink: UplinkSolution,
    pub downlink: DownlinkSolution,
}

/// Distortion levels that put every RRH's downlink compression rate exactly
/// at its fronthaul capacity.
///
/// Solves `2^(2C_ℓ)·d_ℓ - Σ_i a_{ℓi}²·d_i = p·‖b_ℓ‖²` and rejects singular
/// systems or non-positive solutions.
pub fn solve_downlink_distortions(
    b_dl: &Matrix,
    a_r_dl: &IntegerMatrix,
    capacity: &[f64],
    p_ul: f64,
) -> Result<Vec<f64>, DownlinkError> {
    let l = b_dl.rows();
    if a_r_dl.rows() != l || a_r_dl.cols() != l || capacity.len() != l {
        return Err(DownlinkError::DimensionMismatch);
    }
    let mut sys = Matrix::zeros(l, l);
    let mut rhs = vec![0.0; l];
    for ell in 0..l {
        for i in 0..l {
            let a = a_r_dl[(ell, i)] as f64;
            sys[(ell, i)] = -a * a;
        }
        sys[(ell, ell)] += math::powf(2.0, 2.0 * capacity[ell]);
        rhs[ell] = p_ul * math::hypot_sq(b_dl.row(ell));
    }
    let d = solve_general(&sys, &rhs).ok_or(DownlinkError::Infeasible)?;
    if d.iter().any(|&x| !(x > 0.0)) {
        return Err(DownlinkError::Infeasible);
    }
    Ok(d)
}

/// Transmit power of one RRH: beamformed signal power plus carried
/// quantization noise, `p·‖b_ℓ‖² + Σ_i a_{ℓi}²·d_i`.
pub fn downlink_power(b_row: &[f64], a_row: &[i64], p_ul: f64, d_dl: &[f64]) -> f64 {
    let signal = p_ul * math::hypot_sq(b_row);
    let carried: f64 = a_row
        .iter()
        .zip(d_dl)
        .map(|(&a, &d)| (a * a) as f64 * d)
        .sum();
    signal + carried
}

/// Downlink compression rate at one RRH, `½·log2⁺(p_ℓ / d_ℓ)`; at the solved
/// distortions this reproduces the fronthaul capacity exactly.
pub fn downlink_compression_rate(
    b_row: &[f64],
    a_row: &[i64],
    p_ul: f64,
    d_dl: &[f64],
    d_ell: f64,
) -> f64 {
    0.5 * math::log2_plus(downlink_power(b_row, a_row, p_ul, d_dl) / d_ell)
}

/// `h_k·A_r·D·A_rᵀ·h_kᵀ`: quantization noise seen by user `k`.
fn carried_noise(h_k: &[f64], a_r_dl: &IntegerMatrix, d_dl: &[f64]) -> f64 {
    let l = h_k.len();
    let mut acc = 0.0;
    for (i, &di) in d_dl.iter().enumerate() {
        let mut proj = 0.0;
        for ell in 0..l {
            proj += h_k[ell] * a_r_dl[(ell, i)] as f64;
        }
        acc += proj * proj * di;
    }
    acc
}

/// User-side MMSE scalar
/// `ρ_k = a_ψ,k·P_ψ·B^dlᵀ·h_kᵀ / (h_k(A_r·D·A_rᵀ + B·P_ψ·Bᵀ)h_kᵀ + 1)`.
pub fn mmse_scalar_dl(
    h_k: &[f64],
    b_dl: &Matrix,
    a_r_dl: &IntegerMatrix,
    d_dl: &[f64],
    p_ul: f64,
    a_psi_dl_row: &[f64],
) -> f64 {
    let hb = b_dl.vec_mul(h_k); // h_k·B, length M
    let numerator: f64 = p_ul
        * a_psi_dl_row
            .iter()
            .zip(&hb)
            .map(|(a, g)| a * g)
            .sum::<f64>();
    let denominator = carried_noise(h_k, a_r_dl, d_dl) + p_ul * math::hypot_sq(&hb) + 1.0;
    numerator / denominator
}

/// Effective downlink noise power at an arbitrary scalar equalizer:
/// `‖(ρ·h_k·B − a_ψ,k)·P^½‖² + ρ²(h_k·A_r·D·A_rᵀ·h_kᵀ + 1)`.
pub fn downlink_sigma_sq(
    h_k: &[f64],
    b_dl: &Matrix,
    a_r_dl: &IntegerMatrix,
    d_dl: &[f64],
    p_ul: f64,
    a_psi_dl_row: &[f64],
    rho: f64,
) -> f64 {
    let hb = b_dl.vec_mul(h_k);
    let mismatch: f64 = hb
        .iter()
        .zip(a_psi_dl_row)
        .map(|(g, a)| {
            let e = rho * g - a;
            e * e
        })
        .sum();
    p_ul * mismatch + rho * rho * (carried_noise(h_k, a_r_dl, d_dl) + 1.0)
}

/// Exact inverse of an integer matrix over the rationals, as a real matrix.
fn rational_inverse(a: &IntegerMatrix) -> Option<Matrix> {
    let n = a.rows();
    let det = a.det();
    if det == 0 {
        return None;
    }
    if n == 1 {
        return Some(Matrix::from_rows(&[&[1.0 / det as f64]]));
    }
    let minor = |row: usize, col: usize| -> IntegerMatrix {
        let mut data = Vec::with_capacity((n - 1) * (n - 1));
        for i in 0..n {
            if i == row {
                continue;
            }
            for j in 0..n {
                if j == col {
                    continue;
                }
                data.push(a[(i, j)]);
            }
        }
        IntegerMatrix::new(n - 1, n - 1, data)
    };
    let mut inv = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let cof = minor(j, i).det();
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            inv[(i, j)] = sign * cof as f64 / det as f64;
        }
    }
    Some(inv)
}

/// Per-user rows of `A_ψ^dl = Wᵀ·(A_ψ^ul)⁻¹`: user `k` receives the row of
/// the inverse belonging to its pair. Rational-exact, then carried as reals.
fn pair_inverse_rows(
    a_psi_ul: &IntegerMatrix,
    num_users: usize,
) -> Result<Vec<Vec<f64>>, DownlinkError> {
    let inv = rational_inverse(a_psi_ul).ok_or(DownlinkError::SingularPsi)?;
    let pairing = make_adjacent_pairing(a_psi_ul.rows());
    assert_eq!(pairing.num_users(), num_users);
    Ok((0..num_users)
        .map(|k| inv.row(pairing.pair_of(k)).to_vec())
        .collect())
}

/// Per-user downlink rates at the MMSE scalars (Eq. chain: pre-inverted pair
/// combinations, carried quantization noise, `½·log2⁺(p/σ²)`).
pub fn downlink_user_rates(
    h_dl: &Matrix,
    b_dl: &Matrix,
    a_r_dl: &IntegerMatrix,
    d_dl: &[f64],
    p_ul: f64,
    a_psi_ul: &IntegerMatrix,
) -> Result<Vec<f64>, DownlinkError> {
    let (rates, _, _) = downlink_rates_detailed(h_dl, b_dl, a_r_dl, d_dl, p_ul, a_psi_ul)?;
    Ok(rates)
}

fn downlink_rates_detailed(
    h_dl: &Matrix,
    b_dl: &Matrix,
    a_r_dl: &IntegerMatrix,
    d_dl: &[f64],
    p_ul: f64,
    a_psi_ul: &IntegerMatrix,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), DownlinkError> {
    let k = h_dl.rows();
    let psi_rows = pair_inverse_rows(a_psi_ul, k)?;
    let mut rates = Vec::with_capacity(k);
    let mut rhos = Vec::with_capacity(k);
    let mut sigmas = Vec::with_capacity(k);
    for user in 0..k {
        let h_k = h_dl.row(user);
        let rho = mmse_scalar_dl(h_k, b_dl, a_r_dl, d_dl, p_ul, &psi_rows[user]);
        let sigma = downlink_sigma_sq(h_k, b_dl, a_r_dl, d_dl, p_ul, &psi_rows[user], rho);
        rates.push(0.5 * math::log2_plus(p_ul / sigma));
        rhos.push(rho);
        sigmas.push(sigma);
    }
    Ok((rates, rhos, sigmas))
}

/// Iterative downlink optimization: fix `A_r^dl` to the transpose of the
/// uplink matrix, then shape the beamformer by BFGS so the downlink user
/// rates match the uplink ones.
///
/// The distortions are re-solved inside every objective evaluation; an
/// infeasible solve contributes a flat large value and power violations a
/// smooth quadratic penalty. Initializations are standard-normal matrices
/// drawn from `(seed, attempt)`, so results are reproducible; the best
/// power-feasible candidate over all attempts is returned.
pub fn ido(
    config: &SystemConfig,
    h_dl: &Matrix,
    ul: &UplinkSolution,
    seed: u64,
) -> Result<DownlinkSolution, DownlinkError> {
    let l = config.num_rrh;
    let m = config.num_pairs();
    let p = config.coding_power();
    let a_r_dl = ul.a_r.transpose();
    let capacity = config.fronthaul_capacity.clone();
    let power_limits = config.downlink_power_limits.clone();
    let target = ul.user_rates.clone();

    // Fail early if the pair matrix cannot be inverted.
    pair_inverse_rows(&ul.a_psi, config.num_users)?;

    let objective = {
        let a_r_dl = a_r_dl.clone();
        let a_psi = ul.a_psi.clone();
        let h_dl = h_dl.clone();
        let capacity = capacity.clone();
        let power_limits = power_limits.clone();
        let target = target.clone();
        move |x: &[f64]| -> f64 {
            let b = Matrix::new(l, m, x.to_vec());
            let Ok(d) = solve_downlink_distortions(&b, &a_r_dl, &capacity, p) else {
                return INFEASIBLE_OBJECTIVE;
            };
            let mut penalty = 0.0;
            for ell in 0..l {
                let pw = downlink_power(b.row(ell), a_r_dl.row(ell), p, &d);
                let excess = pw - power_limits[ell];
                if excess > 0.0 {
                    penalty += POWER_PENALTY * excess * excess;
                }
            }
            let Ok(rates) = downlink_user_rates(&h_dl, &b, &a_r_dl, &d, p, &a_psi) else {
                return INFEASIBLE_OBJECTIVE;
            };
            let mismatch: f64 = rates
                .iter()
                .zip(&target)
                .map(|(r, t)| (r - t) * (r - t))
                .sum();
            mismatch + penalty
        }
    };

    let mut best: Option<(f64, DownlinkSolution)> = None;
    for attempt in 0..=MAX_RESTARTS {
        let mut rng = derived_rng(seed, STREAM_DOWNLINK_INIT, attempt as u64);
        let x0: Vec<f64> = (0..l * m)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let grad = |x: &[f64]| fd_gradient(&objective, x);
        let (x_opt, report) =
            bfgs_minimize(&objective, grad, &x0, WolfeParams::default(), 1e-6, 200);

        let b = Matrix::new(l, m, x_opt);
        let Ok(d) = solve_downlink_distortions(&b, &a_r_dl, &capacity, p) else {
            continue;
        };
        let powers: Vec<f64> = (0..l)
            .map(|ell| downlink_power(b.row(ell), a_r_dl.row(ell), p, &d))
            .collect();
        if powers
            .iter()
            .zip(&power_limits)
            .any(|(pw, lim)| *pw > lim + 1e-8)
        {
            continue;
        }
        let Ok((rates, rhos, _)) =
            downlink_rates_detailed(h_dl, &b, &a_r_dl, &d, p, &ul.a_psi)
        else {
            continue;
        };
        let mismatch_sq: f64 = rates
            .iter()
            .zip(&target)
            .map(|(r, t)| (r - t) * (r - t))
            .sum();
        let mismatch_abs: f64 = rates
            .iter()
            .zip(&target)
            .map(|(r, t)| math::abs(r - t))
            .sum();
        let candidate = DownlinkSolution {
            b_dl: b,
            a_r_dl: a_r_dl.clone(),
            d_dl: d,
            rho: rhos,
            user_rates: rates,
            rrh_powers: powers,
            report: report.clone(),
        };
        let better = match &best {
            Some((obj, _)) => mismatch_sq < *obj,
            None => true,
        };
        if better {
            best = Some((mismatch_sq, candidate));
        }
        if mismatch_abs <= RATE_MATCH_EPS {
            break;
        }
    }
    best.map(|(_, sol)| sol)
        .ok_or(DownlinkError::NoFeasibleSolution)
}

/// Per-user end-to-end rates: the elementwise minimum of the two phases.
pub fn end_to_end_rates(
    ul: &UplinkSolution,
    dl: &DownlinkSolution,
) -> Result<EndToEndResult, DownlinkError> {
    if ul.user_rates.len() != dl.user_rates.len() {
        return Err(DownlinkError::DimensionMismatch);
    }
    let per_user_rate: Vec<f64> = ul
        .user_rates
        .iter()
        .zip(&dl.user_rates)
        .map(|(a, b)| a.min(*b))
        .collect();
    let sum_rate = per_user_rate.iter().sum();
    Ok(EndToEndResult {
        per_user_rate,
        sum_rate,
        uplink: ul.clone(),
        downlink: dl.clone(),
    })
}
