//! Seeded random streams. Every stochastic routine in the crate draws from
//! [`SimRng`] so results are reproducible bit-for-bit from a `u64` seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
