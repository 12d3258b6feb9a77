//! Random streams.
//!
//! Every run is driven by one master seed. Each `(process, purpose)` pair owns a
//! ChaCha8 stream whose 64-bit stream id is `process << 2 | purpose`, so adding a
//! process never perturbs the draws of the existing ones, and policies that give
//! the same process the same number of trials consume identical draws. Seeds for
//! independent jobs (replications, sweep points) come from [`derive_seed`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    /// Inter-sample delays `X`.
    Sampling = 0,
    /// Channel busy times `Y`.
    Service = 1,
    /// Time-stamp noise.
    Noise = 2,
}

pub fn stream(seed: u64, process: usize, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((process as u64) << 2) | purpose as u64);
    rng
}

/// The three streams of one process.
#[derive(Debug, Clone)]
pub struct ProcessStreams {
    pub sampling: ChaCha8Rng,
    pub service: ChaCha8Rng,
    pub noise: ChaCha8Rng,
}

impl ProcessStreams {
    pub fn new(seed: u64, process: usize) -> Self {
        Self {
            sampling: stream(seed, process, Purpose::Sampling),
            service: stream(seed, process, Purpose::Service),
            noise: stream(seed, process, Purpose::Noise),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of job `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0x5eed)))
}
