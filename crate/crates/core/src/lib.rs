//! Rate computation and optimization for a multi-pair two-way C-RAN link built
//! on lattice compression and compute-and-forward.
//!
//! The crate is organised around the transmission chain:
//!
//! * [`system`] — network configuration, user pairing, and seeded Rayleigh
//!   channel sampling.
//! * [`numerics`] — dense linear algebra (Cholesky, SPD solves, exact integer
//!   rank) and generic optimizers (bisection, BFGS with a Wolfe cubic line
//!   search, log-barrier Newton).
//! * [`lattice`] — LLL reduction and greedy full-rank coefficient selection,
//!   with a brute-force shortest-vector oracle for small instances.
//! * [`uplink`] — compression/computation rate formulas and the iterative
//!   uplink optimizer (distortion bisection + barrier precoder update).
//! * [`downlink`] — reverse-quantized beamforming, distortion solves, user-side
//!   MMSE rates, the iterative downlink optimizer, and end-to-end assembly.
//! * [`modular`] — exact mod-q verification of the pairwise side-information
//!   cancellation chain.
//!
//! All computations are pure functions of their inputs; nothing in the crate
//! performs IO or keeps global state, so distinct channel realizations can be
//! processed concurrently. The crate is `no_std` (with `alloc`); the companion
//! CLI crate carries file formats and the experiment harness.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod downlink;
pub mod lattice;
mod math;
pub mod modular;
pub mod numerics;
pub mod system;
pub mod uplink;

pub use numerics::{IntegerMatrix, Matrix};
