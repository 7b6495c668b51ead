//! Seeded generators and deterministic sub-stream derivation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type CrbmRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> CrbmRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes `parts` into `base` to name an independent stream, e.g.
/// `derive_seed(seed, &[epoch, case])`.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut state = splitmix64(base);
    for &p in parts {
        state = splitmix64(state ^ splitmix64(p.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    state
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
