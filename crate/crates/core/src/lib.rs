//! Simulation library for manipulation-robust fairness audits: the
//! geometry of detection probabilities, plug-in demographic parity
//! estimation, fairwashing strategies for the audited platform, and the
//! audit protocol tying them together.

pub mod audit;
pub mod geometry;
pub mod protocol;
pub mod strategies;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed from a master seed and a salt, so
/// nested simulations stay reproducible without sharing RNG streams.
pub fn derive_seed(master: u64, salt: u64) -> u64 {
    splitmix64(master.wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}
