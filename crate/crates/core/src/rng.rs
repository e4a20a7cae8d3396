//! Deterministic seeding.
//!
//! A run has one root seed. Every random stream (environment resets, network
//! initialisation, replay sampling, exploration noise, observation wrapper
//! noise, periodic resets, analysis initialisations) derives its own seed as
//!
//! ```text
//! stream_seed = splitmix64(root + tag * 0x9E3779B97F4A7C15)
//! ```
//!
//! where `tag` is the stream's [`Stream::tag`]. Indexed streams (per reset,
//! per initialisation) fold the index into the tag as `tag << 32 | index`.
//! Each stream seed feeds a ChaCha8 generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Env,
    Init,
    Sampling,
    Exploration,
    Wrapper,
    Reset(u32),
    Analysis(u32),
    Policy,
}

impl Stream {
    pub fn tag(self) -> u64 {
        match self {
            Stream::Env => 1,
            Stream::Init => 2,
            Stream::Sampling => 3,
            Stream::Exploration => 4,
            Stream::Wrapper => 5,
            Stream::Reset(i) => (6 << 32) | i as u64,
            Stream::Analysis(i) => (7 << 32) | i as u64,
            Stream::Policy => 8,
        }
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(root: u64, stream: Stream) -> u64 {
    splitmix64(root.wrapping_add(stream.tag().wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn stream_rng(root: u64, stream: Stream) -> Rng {
    rng_from_seed(derive_seed(root, stream))
}

pub fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}
