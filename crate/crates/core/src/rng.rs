//! Seeded substreams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream selected by
//! (seed, key). The key is hashed from the logical position of the sample
//! (domain tag, stratum, sample index), never from the worker thread, so
//! results do not depend on how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type McRng = ChaCha8Rng;

pub mod domain {
    pub const CHAOS_OUTER: u64 = 1;
    pub const FK_CONFIG: u64 = 2;
    pub const GAMMA: u64 = 3;
    pub const PSI: u64 = 4;
    pub const SAMPLER_TEST: u64 = 5;
    pub const WHITE_LIMIT: u64 = 6;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream_id(key: &[u64]) -> u64 {
    key.iter()
        .fold(0x5851_f42d_4c95_7f2d, |h, &k| splitmix(h ^ splitmix(k)))
}

pub fn substream(seed: u64, key: &[u64]) -> McRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream_id(key));
    r
}
