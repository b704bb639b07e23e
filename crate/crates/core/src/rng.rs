//! Deterministic seed derivation.
//!
//! All randomness in the crate flows from a single root seed. Independent
//! streams (network generation, treatment draws, per-replicate noise, ...)
//! are derived with a counter scheme so that parallel and serial execution
//! consume identical random sequences.

use rand::rngs::StdRng;
use rand::SeedableRng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function. A full-period mixer, used here to turn a
/// (root, stream) pair into an independent stream seed.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed for stream `stream` of root seed `root`.
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    splitmix64(root.wrapping_add(stream.wrapping_mul(GOLDEN_GAMMA)))
}

/// RNG for stream `stream` of root seed `root`.
pub fn stream_rng(root: u64, stream: u64) -> StdRng {
    StdRng::seed_from_u64(derive_seed(root, stream))
}
