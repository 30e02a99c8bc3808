//! Seed derivation for reproducible ensembles.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] seeded from a 64-bit
//! value. Child streams are derived from a parent seed and an index with
//! [`split_seed`], a SplitMix64 finalizer applied to `parent + φ·(index + 1)`.
//! Ensemble member `j` of sweep point `i` therefore gets
//! `split_seed(split_seed(master, i), j)` no matter which worker runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the seed of child stream `index` from `parent`.
pub fn split_seed(parent: u64, index: u64) -> u64 {
    mix64(parent.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seeds for one trajectory: circuit sampling and measurement outcomes use
/// independent streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrajectorySeeds {
    pub circuit: u64,
    pub outcomes: u64,
}

impl TrajectorySeeds {
    pub fn from_stream(stream_seed: u64) -> Self {
        Self {
            circuit: split_seed(stream_seed, 0),
            outcomes: split_seed(stream_seed, 1),
        }
    }

    /// Seeds of ensemble member `member` under `master`.
    pub fn member(master: u64, member: usize) -> Self {
        Self::from_stream(split_seed(master, member as u64))
    }
}
