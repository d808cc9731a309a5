//! Explicitly seeded random number generation.
//!
//! Nothing in the crate touches a global RNG; every stochastic routine takes a
//! `&mut SeededRng` (or a seed) from the caller.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 42;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream for a named sub-task so that adding draws in
/// one stage never shifts the numbers seen by another.
pub fn derive(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
