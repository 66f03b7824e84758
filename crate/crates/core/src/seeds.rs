//! Seed derivation. Every randomized stage draws from a ChaCha stream whose
//! seed is a splitmix64 mix of the run seed and a fixed per-stage tag, so the
//! whole pipeline is a pure function of the run seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TAG_SPLIT_REAL: u64 = 0x5350_4c49_5452;
pub const TAG_SPLIT_FAKE: u64 = 0x5350_4c49_5446;
pub const TAG_SYNTH_REAL: u64 = 0x5259_4e54_4852;
pub const TAG_SYNTH_FAKE_SRC: u64 = 0x5259_4e54_4846;
pub const TAG_PATCH_SAMPLE: u64 = 0x5041_5443_48;
pub const TAG_CLASS_BALANCE: u64 = 0x4241_4c41_4e43;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a run seed with a stage tag (and optional index) into a stream seed.
pub fn mix(seed: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ tag).wrapping_add(index))
}

/// Deterministic RNG for one (seed, tag, index) stream.
pub fn rng_for(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, tag, index))
}
