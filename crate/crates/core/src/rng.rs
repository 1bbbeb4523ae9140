//! Keyed random streams.
//!
//! Every random draw in the toolkit flows from a single top-level seed through
//! [`keyed_rng`]. A stream is identified by its key path (sample index, op
//! index, ...), so parallel workers can draw independently and the result never
//! depends on scheduling order or worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// splitmix64 finalizer; good avalanche for mixing key parts.
fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a counter-based random stream from `seed` and a key path.
///
/// The same `(seed, key)` pair always yields the same stream, on every
/// platform and regardless of how many other streams were derived before it.
pub fn keyed_rng(seed: u64, key: &[u64]) -> ChaCha12Rng {
    let mut state = mix64(seed);
    for (i, part) in key.iter().enumerate() {
        state = mix64(state ^ mix64(part.wrapping_add(i as u64)));
    }
    ChaCha12Rng::seed_from_u64(state)
}
