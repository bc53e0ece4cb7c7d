//! Network configuration, user pairing, and seeded channel sampling.
//!
//! Channels are real-valued Rayleigh block fading: every uplink gain is an
//! i.i.d. standard normal, and the downlink channel is the transpose of the
//! uplink one (reciprocity). Sampling is counter-based — the generator for a
//! realization is derived from `(seed, index)` alone — so any subset of
//! realizations can be evaluated in any order, on any number of workers, with
//! bit-identical results.

use alloc::vec;
use alloc::vec::Vec;

use rand::distributions::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::math;
use crate::numerics::{IntegerMatrix, Matrix};

/// Network dimensions, powers, fronthaul capacities, and tolerances.
#[derive(Debug, Clone)]
pub struct SystemConfig {
    /// Number of RRHs (`L`).
    pub num_rrh: usize,
    /// Number of users (`K`, even; `M = K/2` pairs).
    pub num_users: usize,
    /// Operating SNR in dB; fixes the coding power of the coarse lattice.
    pub snr_db: f64,
    /// Fronthaul capacity per RRH, bits per transmission.
    pub fronthaul_capacity: Vec<f64>,
    /// Per-user uplink transmit power limits (linear).
    pub uplink_power_limits: Vec<f64>,
    /// Per-RRH downlink transmit power limits (linear).
    pub downlink_power_limits: Vec<f64>,
    /// Convergence tolerance shared by the iterative optimizers.
    pub eps: f64,
    /// Cap on uplink precoder/distortion alternations.
    pub max_outer_iters: usize,
}

impl SystemConfig {
    /// Configuration with power limits defaulted from the coding power:
    /// `P_k = K * p` uplink and the same total per RRH downlink.
    pub fn new(num_rrh: usize, num_users: usize, snr_db: f64, fronthaul_capacity: Vec<f64>) -> Self {
        let p = coding_power(snr_db, num_users);
        let total = num_users as f64 * p;
        let cfg = Self {
            num_rrh,
            num_users,
            snr_db,
            fronthaul_capacity,
            uplink_power_limits: vec![total; num_users],
            downlink_power_limits: vec![total; num_rrh],
            eps: 1e-6,
            max_outer_iters: 20,
        };
        cfg.check().expect("invalid system configuration");
        cfg
    }

    /// Structural validation; returns a description of the first violation.
    pub fn check(&self) -> Result<(), &'static str> {
        if self.num_rrh < 1 {
            return Err("need at least one RRH");
        }
        if self.num_users < 2 || self.num_users % 2 != 0 {
            return Err("user count must be even and at least 2");
        }
        if self.fronthaul_capacity.len() != self.num_rrh {
            return Err("fronthaul capacity list must have one entry per RRH");
        }
        if self.fronthaul_capacity.iter().any(|&c| !(c >= 0.0)) {
            return Err("fronthaul capacities must be non-negative");
        }
        if self.uplink_power_limits.len() != self.num_users {
            return Err("uplink power list must have one entry per user");
        }
        if self.uplink_power_limits.iter().any(|&p| !(p > 0.0)) {
            return Err("uplink power limits must be positive");
        }
        if self.downlink_power_limits.len() != self.num_rrh {
            return Err("downlink power list must have one entry per RRH");
        }
        if self.downlink_power_limits.iter().any(|&p| !(p > 0.0)) {
            return Err("downlink power limits must be positive");
        }
        if !(self.eps > 0.0) {
            return Err("eps must be positive");
        }
        if self.max_outer_iters == 0 {
            return Err("max_outer_iters must be at least 1");
        }
        Ok(())
    }

    pub fn num_pairs(&self) -> usize {
        self.num_users / 2
    }

    /// Coding power `p` of the coarse lattice at the configured SNR.
    pub fn coding_power(&self) -> f64 {
        coding_power(self.snr_db, self.num_users)
    }
}

/// `p = 10^(snr_db/10) / K`.
pub fn coding_power(snr_db: f64, num_users: usize) -> f64 {
    assert!(num_users >= 1);
    math::powf(10.0, snr_db / 10.0) / num_users as f64
}

/// Binary M×K user-pair association: every user belongs to exactly one pair,
/// every pair holds exactly two users.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairingMatrix {
    w: IntegerMatrix,
}

impl PairingMatrix {
    pub fn new(w: IntegerMatrix) -> Result<Self, &'static str> {
        let (m, k) = (w.rows(), w.cols());
        if k != 2 * m {
            return Err("pairing matrix must be M x 2M");
        }
        for i in 0..m {
            for j in 0..k {
                if !matches!(w[(i, j)], 0 | 1) {
                    return Err("pairing entries must be 0 or 1");
                }
            }
        }
        for i in 0..m {
            if w.row(i).iter().sum::<i64>() != 2 {
                return Err("each pair must contain exactly two users");
            }
        }
        for j in 0..k {
            if (0..m).map(|i| w[(i, j)]).sum::<i64>() != 1 {
                return Err("each user must belong to exactly one pair");
            }
        }
        Ok(Self { w })
    }

    pub fn matrix(&self) -> &IntegerMatrix {
        &self.w
    }

    pub fn num_pairs(&self) -> usize {
        self.w.rows()
    }

    pub fn num_users(&self) -> usize {
        self.w.cols()
    }

    /// Index of the pair containing user `k`.
    pub fn pair_of(&self, user: usize) -> usize {
        (0..self.w.rows())
            .find(|&m| self.w[(m, user)] == 1)
            .expect("pairing invariant: every user has a pair")
    }

    /// The other user in `user`'s pair.
    pub fn partner_of(&self, user: usize) -> usize {
        let m = self.pair_of(user);
        (0..self.w.cols())
            .find(|&k| k != user && self.w[(m, k)] == 1)
            .expect("pairing invariant: every pair has two users")
    }
}

/// Pair `m` holds users `2m` and `2m+1`.
pub fn make_adjacent_pairing(num_pairs: usize) -> PairingMatrix {
    assert!(num_pairs >= 1);
    let mut w = IntegerMatrix::zeros(num_pairs, 2 * num_pairs);
    for m in 0..num_pairs {
        w[(m, 2 * m)] = 1;
        w[(m, 2 * m + 1)] = 1;
    }
    PairingMatrix::new(w).expect("adjacent pairing satisfies the invariants")
}

/// One block-fading draw of the uplink channel.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// L×K uplink gain matrix.
    pub h_ul: Matrix,
    pub seed: u64,
    pub index: u64,
}

impl ChannelRealization {
    /// K×L downlink channel; reciprocity makes it exactly the transpose.
    pub fn downlink(&self) -> Matrix {
        self.h_ul.transpose()
    }
}

// Domain tags keep independent RNG streams (channel draws, optimizer
// restarts) from colliding on the same (seed, index).
pub(crate) const STREAM_CHANNEL: u64 = 0x4348_414e;
pub(crate) const STREAM_DOWNLINK_INIT: u64 = 0x4944_4f00;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based generator for `(seed, domain, index)`: the key is a pure
/// function of the triple, never of call order.
pub(crate) fn derived_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut state = seed
        ^ domain.wrapping_mul(0xA24B_AED4_963E_E407)
        ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Draws the `index`-th channel realization of the stream identified by
/// `seed`. Entries are i.i.d. standard normal; identical `(seed, index)`
/// always produce bit-identical matrices.
pub fn sample_channel(config: &SystemConfig, seed: u64, index: u64) -> ChannelRealization {
    let mut rng = derived_rng(seed, STREAM_CHANNEL, index);
    let n = config.num_rrh * config.num_users;
    let data: Vec<f64> = (0..n)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    ChannelRealization {
        h_ul: Matrix::new(config.num_rrh, config.num_users, data),
        seed,
        index,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_config() -> SystemConfig {
        SystemConfig::new(2, 4, 35.0, vec![4.0, 4.0])
    }

    #[test]
    fn adjacent_pairing_single_pair() {
        let w = make_adjacent_pairing(1);
        assert_eq!(w.matrix(), &IntegerMatrix::from_rows(&[&[1, 1]]));
    }

    #[test]
    fn adjacent_pairing_two_pairs() {
        let w = make_adjacent_pairing(2);
        assert_eq!(
            w.matrix(),
            &IntegerMatrix::from_rows(&[&[1, 1, 0, 0], &[0, 0, 1, 1]])
        );
    }

    #[test]
    fn adjacent_pairing_invariants() {
        let w = make_adjacent_pairing(3);
        let m = w.matrix();
        assert_eq!((m.rows(), m.cols()), (3, 6));
        for i in 0..3 {
            assert_eq!(m.row(i).iter().sum::<i64>(), 2);
        }
        for j in 0..6 {
            assert_eq!((0..3).map(|i| m[(i, j)]).sum::<i64>(), 1);
        }
    }

    #[test]
    fn pairing_rejects_bad_shapes() {
        assert!(PairingMatrix::new(IntegerMatrix::from_rows(&[&[1, 1, 0]])).is_err());
        assert!(PairingMatrix::new(IntegerMatrix::from_rows(&[&[2, 0]])).is_err());
        assert!(
            PairingMatrix::new(IntegerMatrix::from_rows(&[&[1, 1, 1, 0], &[0, 0, 0, 1]]))
                .is_err()
        );
    }

    #[test]
    fn partner_lookup() {
        let w = make_adjacent_pairing(2);
        assert_eq!(w.pair_of(0), 0);
        assert_eq!(w.partner_of(0), 1);
        assert_eq!(w.partner_of(3), 2);
    }

    #[test]
    fn sampling_is_deterministic() {
        let cfg = test_config();
        let a = sample_channel(&cfg, 1, 0);
        let b = sample_channel(&cfg, 1, 0);
        assert_eq!(a.h_ul, b.h_ul);
    }

    #[test]
    fn sampling_separates_streams() {
        let cfg = test_config();
        let a = sample_channel(&cfg, 1, 0);
        let b = sample_channel(&cfg, 1, 1);
        let c = sample_channel(&cfg, 2, 0);
        assert_ne!(a.h_ul, b.h_ul);
        assert_ne!(a.h_ul, c.h_ul);
    }

    #[test]
    fn downlink_is_transpose() {
        let cfg = test_config();
        let ch = sample_channel(&cfg, 7, 3);
        assert_eq!(ch.downlink(), ch.h_ul.transpose());
    }

    #[test]
    fn sample_moments_match_standard_normal() {
        let cfg = test_config();
        let per = cfg.num_rrh * cfg.num_users;
        let realizations = 100_000 / per + 1;
        let mut count = 0usize;
        let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
        for idx in 0..realizations {
            let ch = sample_channel(&cfg, 42, idx as u64);
            for &x in ch.h_ul.data() {
                sum += x;
                sum_sq += x * x;
                count += 1;
            }
        }
        let mean = sum / count as f64;
        let var = sum_sq / count as f64 - mean * mean;
        assert!(mean.abs() <= 0.02, "mean {mean}");
        assert!((var - 1.0).abs() <= 0.05, "variance {var}");
    }

    #[test]
    fn coding_power_values() {
        assert!((coding_power(35.0, 4) - 790.5694150420949).abs() <= 1e-9);
        assert_eq!(coding_power(0.0, 1), 1.0);
        assert!((coding_power(10.0, 2) - 5.0).abs() <= 1e-12);
    }

    #[test]
    fn config_checks_invariants() {
        let mut cfg = test_config();
        cfg.uplink_power_limits[0] = 0.0;
        assert!(cfg.check().is_err());
        let mut cfg = test_config();
        cfg.fronthaul_capacity = vec![4.0];
        assert!(cfg.check().is_err());
        let mut cfg = test_config();
        cfg.num_users = 3;
        assert!(cfg.check().is_err());
    }
}
