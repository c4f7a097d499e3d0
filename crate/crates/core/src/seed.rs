//! Deterministic seed derivation.
//!
//! Every randomized task derives its generator from `(master seed, stage
//! name, task key)`, so re-running one task in isolation reproduces exactly
//! what the full pipeline produced for it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Hashes a master seed with a stage name and a task key.
pub fn derive_seed(master: u64, stage: &str, key: &str) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &master.to_le_bytes());
    h = fnv1a(h, stage.as_bytes());
    // separator so ("ab", "c") and ("a", "bc") differ
    h = fnv1a(h, &[0xff]);
    h = fnv1a(h, key.as_bytes());
    splitmix64(h)
}

/// Sub-seed for the `index`-th repetition (surrogate, restart, null sample).
pub fn sub_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x5151_5151)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
