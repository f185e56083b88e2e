//! Deterministic random streams.
//!
//! Every random quantity in the toolkit is drawn from a ChaCha stream keyed by
//! a 64-bit seed and a stream index, so sample `i` of a dataset (or instance
//! `i` of an evaluation) sees the same numbers no matter how work is split
//! across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// The PRNG used throughout the crate.
pub type StreamRng = ChaCha12Rng;

/// Purpose tags that separate otherwise identical `(seed, index)` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Dataset = 1,
    Evaluation = 2,
    Training = 3,
    Init = 4,
    Solver = 5,
    Benchmark = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Returns the generator for stream `index` of `domain` under `seed`.
pub fn stream_rng(seed: u64, domain: Domain, index: u64) -> StreamRng {
    let mut rng = StreamRng::seed_from_u64(splitmix64(seed ^ splitmix64(domain as u64)));
    rng.set_stream(index);
    rng
}

/// Derives a child seed; used when a component needs its own seed rather than a stream.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed.wrapping_add(splitmix64(index)))
}
