//! Seeded, splittable random streams.
//!
//! Every draw in the crate comes from a ChaCha20 generator keyed by a master
//! seed and a [`Stream`] id, so latent positions, edge uniforms, covariates
//! and innovations never share a sequence. Replications derive child seeds
//! with SplitMix64, which keeps per-replication seeds fixed no matter how the
//! work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Purpose of a random stream. The discriminant is the ChaCha stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Latent = 1,
    Edges = 2,
    Covariates = 3,
    Innovations = 4,
    Auxiliary = 5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStreams {
    seed: u64,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, which: Stream) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(which as u64);
        rng
    }

    /// Independent child seed, e.g. one per replication.
    pub fn child(&self, index: u64) -> RngStreams {
        let mixed = splitmix64(self.seed ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)));
        RngStreams::new(mixed)
    }
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
