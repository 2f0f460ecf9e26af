//! Seed derivation for reproducible per-image random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PipelineRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for image `index` of a run seeded with `global_seed`. Independent of
/// scheduling order.
pub fn derive_seed(global_seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(global_seed) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn image_rng(global_seed: u64, index: u64) -> PipelineRng {
    PipelineRng::seed_from_u64(derive_seed(global_seed, index))
}

pub fn rng_from_seed(seed: u64) -> PipelineRng {
    PipelineRng::seed_from_u64(seed)
}
