//! Spatio-temporal influence maximization on time-varying graphs.
//!
//! This crate holds the allocation-only algorithmic core: the snapshot graph
//! model and its sparse kernels, the synthetic TVG generator, the stochastic
//! diffusion environment, a small set of differentiable kernels, the
//! distributional STIM network, baseline agents and the training loop.
//!
//! It is `no_std` (with `alloc`) unless the `std` feature is enabled. File
//! formats, the evaluation harness and the command line live in the `stim`
//! crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod agents;
pub mod diffusion;
pub mod error;
pub mod graph;
mod math;
pub mod model;
pub mod nn;
pub mod synth;
pub mod training;

pub use error::{Error, Result};

/// RNG used for every stochastic draw in the crate.
pub type StimRng = rand_chacha::ChaCha8Rng;

/// Builds the crate RNG from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> StimRng {
    use rand::SeedableRng;
    StimRng::seed_from_u64(seed)
}

/// Derives an independent stream seed from a parent seed and a stream index.
///
/// SplitMix64 finalizer over the pair, so that episode `i` of a run seeded
/// with `s` always gets the same stream regardless of execution order.
pub fn split_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
