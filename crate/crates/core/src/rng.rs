//! Seeded random streams.
//!
//! All randomness goes through ChaCha8 (`rand_chacha`), a portable
//! counter-based generator: the same `(seed, stream)` pair produces the same
//! numbers on every platform. Independent shards of a computation use
//! distinct stream ids, so sharded and sequential runs agree bit for bit.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use rand_chacha::ChaCha8Rng as Rng;

/// Generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw on `[0, 1)` with 53 random bits.
#[inline]
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
pub fn bernoulli<R: RngCore + ?Sized>(rng: &mut R, p: f64) -> bool {
    uniform(rng) < p
}
