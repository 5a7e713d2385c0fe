//! Seed derivation for schedule-independent randomness.
//!
//! Every parallelizable unit of work (a tree in an ensemble, a user in the
//! traffic generator, a fold in cross-validation) draws from its own RNG
//! stream whose seed is a pure function of the master seed and the unit's
//! identity. Results are therefore identical no matter how work is scheduled
//! across threads.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

/// splitmix64 finalizer; good 64-bit avalanche, stable across platforms.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a path of identifiers.
///
/// `derive(s, &[a, b])` != `derive(s, &[b, a])` in general; the path is
/// order-sensitive, so callers encode (user, day, index)-style coordinates.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    let mut h = splitmix64(master);
    for &part in path {
        h = splitmix64(h ^ splitmix64(part));
    }
    h
}

/// RNG stream for a derived seed. ChaCha8 is fast, portable, and its output
/// is identical on every platform for a given seed.
pub fn stream(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, path))
}
