//! Seeded random sources. Every stochastic routine in the crate takes one of
//! these so that results are a pure function of inputs and seed.

use rand::SeedableRng;

pub type SeededRng = rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// Derives an independent stream from a base seed and a label, so that e.g.
/// initialization and sampling in one run do not share state.
pub fn derive(seed: u64, stream: u64) -> SeededRng {
    let mut rng = SeededRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
