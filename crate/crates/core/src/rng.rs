//! Seed derivation. Every random stream in the simulator is a ChaCha8 generator
//! keyed by a base seed mixed with a path of integer tags, so streams for
//! different clients, rounds and stages never alias and never depend on
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a sequence of tags into a new seed.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng_for(base: u64, tags: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(base, tags))
}

/// Stream tags, one per consumer.
pub(crate) mod tag {
    pub const SYNTH: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const AUGMENT: u64 = 3;
    pub const PARTITION: u64 = 4;
    pub const INIT: u64 = 5;
    pub const SAMPLE_CLIENTS: u64 = 6;
    pub const LOCAL_TRAIN: u64 = 7;
    pub const VISIT_ORDER: u64 = 8;
}
