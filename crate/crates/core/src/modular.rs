//! Exact mod-q verification of the pairwise side-information cancellation.
//!
//! At zero noise the decoding chain is pure algebra over the message group:
//! the BBU forms combinations `V = A_ψ·W·S`, each user applies its row of
//! `Wᵀ·A_ψ⁻¹` to recover its pair-sum, subtracts its own codeword, and is left
//! with the partner's codeword. A prime modulus `q` stands in for the coarse
//! lattice: the chain holds coordinatewise over `Z_q` whenever `det(A_ψ)` is
//! invertible mod `q`, with no tolerance involved.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::numerics::IntegerMatrix;
use crate::system::PairingMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModularError {
    /// `det(A_ψ)` shares a factor with the modulus; the chain cannot invert.
    NotInvertibleModQ,
}

impl fmt::Display for ModularError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotInvertibleModQ => {
                write!(f, "pair coefficient matrix is not invertible modulo q")
            }
        }
    }
}

impl core::error::Error for ModularError {}

/// Coordinatewise `v mod q`, mapped into `[0, q)`.
pub fn mod_reduce(v: &[i64], q: i64) -> Vec<i64> {
    assert!(q >= 2, "modulus must be at least 2");
    v.iter().map(|&x| x.rem_euclid(q)).collect()
}

fn mod_inverse_scalar(a: i64, q: i64) -> Option<i64> {
    // Extended Euclid on (a mod q, q).
    let (mut old_r, mut r) = (a.rem_euclid(q), q);
    let (mut old_s, mut s) = (1i64, 0i64);
    while r != 0 {
        let quot = old_r / r;
        (old_r, r) = (r, old_r - quot * r);
        (old_s, s) = (s, old_s - quot * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(q))
}

/// Inverse of a square integer matrix over `Z_q` by Gauss–Jordan elimination.
fn mod_matrix_inverse(a: &IntegerMatrix, q: i64) -> Option<Vec<Vec<i64>>> {
    let n = a.rows();
    let mut m: Vec<Vec<i64>> = (0..n)
        .map(|i| {
            let mut row: Vec<i64> = a.row(i).iter().map(|&x| x.rem_euclid(q)).collect();
            let mut aug = vec![0i64; n];
            aug[i] = 1;
            row.extend(aug);
            row
        })
        .collect();
    for col in 0..n {
        let pivot_row = (col..n).find(|&r| {
            let v = m[r][col].rem_euclid(q);
            v != 0 && mod_inverse_scalar(v, q).is_some()
        })?;
        m.swap(col, pivot_row);
        let inv = mod_inverse_scalar(m[col][col], q)?;
        for x in m[col].iter_mut() {
            *x = (*x * inv).rem_euclid(q);
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = m[r][col].rem_euclid(q);
            if factor == 0 {
                continue;
            }
            for c in 0..2 * n {
                m[r][c] = (m[r][c] - factor * m[col][c]).rem_euclid(q);
            }
        }
    }
    Some(m.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Recovers the partner codeword of `user` from the decoded pair
/// combinations, exactly over `Z_q`.
///
/// `codewords` holds one row per user (any common length); the chain forms
/// `V = A_ψ·W·S mod q`, applies `user`'s row of `Wᵀ·A_ψ⁻¹ mod q`, subtracts
/// the user's own codeword, and reduces. The result equals the partner's
/// codeword whenever `det(A_ψ)` is invertible mod `q`.
pub fn verify_pair_cancellation(
    pairing: &PairingMatrix,
    a_psi: &IntegerMatrix,
    codewords: &[Vec<i64>],
    user: usize,
    q: i64,
) -> Result<Vec<i64>, ModularError> {
    assert!(q >= 2, "modulus must be at least 2");
    let m = pairing.num_pairs();
    let k = pairing.num_users();
    assert_eq!(a_psi.rows(), m, "coefficient matrix must be M x M");
    assert_eq!(codewords.len(), k, "one codeword per user");
    let dim = codewords[0].len();
    assert!(codewords.iter().all(|c| c.len() == dim), "ragged codewords");

    let inv = mod_matrix_inverse(a_psi, q).ok_or(ModularError::NotInvertibleModQ)?;
    let w = pairing.matrix();

    // V = A_ψ · W · S mod q  (M x dim).
    let mut pair_sums = vec![vec![0i64; dim]; m];
    for pair in 0..m {
        for (user_idx, codeword) in codewords.iter().enumerate() {
            if w[(pair, user_idx)] == 1 {
                for (acc, &s) in pair_sums[pair].iter_mut().zip(codeword) {
                    *acc = (*acc + s).rem_euclid(q);
                }
            }
        }
    }
    let mut combos = vec![vec![0i64; dim]; m];
    for j in 0..m {
        for pair in 0..m {
            let coeff = a_psi[(j, pair)].rem_euclid(q);
            if coeff == 0 {
                continue;
            }
            for (acc, &v) in combos[j].iter_mut().zip(&pair_sums[pair]) {
                *acc = (*acc + coeff * v).rem_euclid(q);
            }
        }
    }

    // Row `user` of Wᵀ·A_ψ⁻¹ is row `pair_of(user)` of the inverse.
    let inv_row = &inv[pairing.pair_of(user)];
    let mut recovered = vec![0i64; dim];
    for j in 0..m {
        if inv_row[j] == 0 {
            continue;
        }
        for (acc, &v) in recovered.iter_mut().zip(&combos[j]) {
            *acc = (*acc + inv_row[j] * v).rem_euclid(q);
        }
    }
    for (acc, &own) in recovered.iter_mut().zip(&codewords[user]) {
        *acc = (*acc - own).rem_euclid(q);
    }
    Ok(recovered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::make_adjacent_pairing;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mod_reduce_examples() {
        assert_eq!(mod_reduce(&[7, -3], 5), vec![2, 2]);
        assert_eq!(mod_reduce(&[0, 0], 7), vec![0, 0]);
        let v = [13, -9, 4];
        let once = mod_reduce(&v, 5);
        assert_eq!(mod_reduce(&once, 5), once);
    }

    #[test]
    fn worked_single_pair_example() {
        // q = 5, W = [1 1], A_ψ = [1], s = (2, 4): v = 6 mod 5 = 1;
        // user 1 recovers (1 - 2) mod 5 = 4 = s_2.
        let pairing = make_adjacent_pairing(1);
        let a_psi = IntegerMatrix::identity(1);
        let codewords = vec![vec![2], vec![4]];
        let rec = verify_pair_cancellation(&pairing, &a_psi, &codewords, 0, 5).unwrap();
        assert_eq!(rec, vec![4]);
        let rec = verify_pair_cancellation(&pairing, &a_psi, &codewords, 1, 5).unwrap();
        assert_eq!(rec, vec![2]);
    }

    #[test]
    fn symmetric_pair_recovers_same_value() {
        let pairing = make_adjacent_pairing(1);
        let a_psi = IntegerMatrix::identity(1);
        let codewords = vec![vec![3, 0, 2], vec![3, 0, 2]];
        let rec = verify_pair_cancellation(&pairing, &a_psi, &codewords, 0, 7).unwrap();
        assert_eq!(rec, vec![3, 0, 2]);
    }

    #[test]
    fn exhaustive_two_pairs_mod_three() {
        // All 3^4 codeword tuples, all 4 users, A_ψ = [[1,1],[1,2]] (det 1).
        let pairing = make_adjacent_pairing(2);
        let a_psi = IntegerMatrix::from_rows(&[&[1, 1], &[1, 2]]);
        let q = 3;
        for s0 in 0..q {
            for s1 in 0..q {
                for s2 in 0..q {
                    for s3 in 0..q {
                        let codewords =
                            vec![vec![s0], vec![s1], vec![s2], vec![s3]];
                        for user in 0..4 {
                            let partner = pairing.partner_of(user);
                            let rec = verify_pair_cancellation(
                                &pairing, &a_psi, &codewords, user, q,
                            )
                            .unwrap();
                            assert_eq!(rec, codewords[partner], "user {user}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_non_invertible_coefficients() {
        let pairing = make_adjacent_pairing(2);
        // det = 2, not invertible mod 2.
        let a_psi = IntegerMatrix::from_rows(&[&[1, 1], &[1, 3]]);
        let codewords = vec![vec![1], vec![0], vec![1], vec![1]];
        assert_eq!(
            verify_pair_cancellation(&pairing, &a_psi, &codewords, 0, 2),
            Err(ModularError::NotInvertibleModQ)
        );
    }

    fn random_invertible(rng: &mut ChaCha8Rng, m: usize, q: i64) -> IntegerMatrix {
        loop {
            let a = IntegerMatrix::new(
                m,
                m,
                (0..m * m).map(|_| rng.gen_range(-6..=6)).collect(),
            );
            if (a.det().rem_euclid(q as i128)) != 0 && mod_inverse_helper(&a, q) {
                return a;
            }
        }
    }

    fn mod_inverse_helper(a: &IntegerMatrix, q: i64) -> bool {
        super::mod_matrix_inverse(a, q).is_some()
    }

    #[test]
    fn recovery_exact_over_all_small_moduli() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for &q in &[2i64, 3, 5, 7] {
            for m in 1..=3usize {
                let pairing = make_adjacent_pairing(m);
                for _ in 0..25 {
                    let a_psi = random_invertible(&mut rng, m, q);
                    let dim = rng.gen_range(1..=3);
                    let codewords: Vec<Vec<i64>> = (0..2 * m)
                        .map(|_| (0..dim).map(|_| rng.gen_range(0..q)).collect())
                        .collect();
                    for user in 0..2 * m {
                        let partner = pairing.partner_of(user);
                        let rec = verify_pair_cancellation(
                            &pairing, &a_psi, &codewords, user, q,
                        )
                        .unwrap();
                        assert_eq!(rec, codewords[partner], "q={q} m={m} user={user}");
                    }
                }
            }
        }
    }

    #[test]
    fn recovery_independent_of_coefficient_choice() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let q = 5;
        for m in 1..=3usize {
            let pairing = make_adjacent_pairing(m);
            for _ in 0..20 {
                let a1 = random_invertible(&mut rng, m, q);
                let a2 = random_invertible(&mut rng, m, q);
                let codewords: Vec<Vec<i64>> = (0..2 * m)
                    .map(|_| vec![rng.gen_range(0..q), rng.gen_range(0..q)])
                    .collect();
                for user in 0..2 * m {
                    let r1 =
                        verify_pair_cancellation(&pairing, &a1, &codewords, user, q).unwrap();
                    let r2 =
                        verify_pair_cancellation(&pairing, &a2, &codewords, user, q).unwrap();
                    assert_eq!(r1, r2);
                }
            }
        }
    }
}
