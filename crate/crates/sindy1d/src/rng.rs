//! Deterministic RNG streams derived from (seed, tag, index).
//!
//! Every stochastic component draws from its own ChaCha stream so that
//! parallel and serial execution produce identical results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// splitmix64 finalizer; decorrelates nearby keys.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed for stream `tag` / element `index`.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    mix(mix(seed ^ mix(tag)) ^ index)
}

/// Independent RNG stream keyed by (seed, tag, index).
pub fn stream(seed: u64, tag: u64, index: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive_seed(seed, tag, index))
}

/// Stream tags; keep values stable, they are part of the reproducibility
/// contract of saved seeds.
pub mod tags {
    pub const PERLIN: u64 = 1;
    pub const PARAMS: u64 = 2;
    pub const ENSEMBLE: u64 = 3;
    pub const EVAL: u64 = 4;
}
