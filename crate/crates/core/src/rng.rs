//! Reproducible random streams.
//!
//! Every random draw in the crate comes from a [`SimRng`] (ChaCha8) built by
//! [`stream_rng`]. A base seed selects the key and a 64-bit stream id selects
//! an independent keystream. Monte Carlo replications use
//! [`replication_rng`], which assigns replication `q` and purpose `p` the
//! stream `q * STREAMS_PER_REPLICATION + p`, so adding or removing purposes
//! never shifts the draws of another replication.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Number of stream ids reserved for each replication.
pub const STREAMS_PER_REPLICATION: u64 = 16;

/// Stream purposes inside one replication.
pub mod purpose {
    pub const NETWORK: u64 = 0;
    pub const SCALES: u64 = 1;
    pub const DIFFUSION: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const INNOVATIONS: u64 = 4;
}

pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn replication_rng(seed: u64, replication: u64, purpose: u64) -> SimRng {
    debug_assert!(purpose < STREAMS_PER_REPLICATION);
    stream_rng(seed, replication * STREAMS_PER_REPLICATION + purpose)
}
