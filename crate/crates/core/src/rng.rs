//! Seeded random streams.
//!
//! Every random draw in the crate goes through ChaCha8 (a counter-based
//! generator with published constants), keyed by a 64-bit seed and a stream
//! tag. Distinct consumers of one seed use distinct tags so that adding draws
//! in one place never shifts the sequence seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags. The numeric values are part of the reproducibility contract.
pub mod streams {
    pub const SYNTH_VOCAB: u64 = 1;
    pub const SYNTH_PATIENTS: u64 = 2;
    pub const SYNTH_DDI: u64 = 3;
    pub const SPLIT: u64 = 10;
    pub const DISTORT: u64 = 11;
    pub const SHUFFLE_LABELS: u64 = 12;
    pub const INIT: u64 = 20;
    pub const DROPOUT: u64 = 21;
    pub const EPOCH_ORDER: u64 = 22;
    pub const PRETRAIN_INIT: u64 = 23;
    pub const PRETRAIN_DROPOUT: u64 = 24;
    pub const PRETRAIN_ORDER: u64 = 25;
    pub const BOOTSTRAP: u64 = 30;
    pub const GRAD_CHECK: u64 = 40;
}

/// A generator for `(seed, stream)`.
pub fn stream(seed: u64, tag: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}
