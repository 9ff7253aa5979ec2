//! Seed derivation for order-independent reproducibility.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] seeded with a
//! value derived from a master seed and the integer coordinates of the work
//! item (sweep point, realization, setting, ...). Work can therefore be
//! scheduled in any order, on any number of threads, without changing a bit
//! of the output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a path of indices into a child seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &idx| {
        splitmix64(acc ^ splitmix64(idx.wrapping_add(GOLDEN)))
    })
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
