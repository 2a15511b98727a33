//! Independent, reproducible random streams.
//!
//! Every consumer (a party's training, a release, the data split) gets its
//! own ChaCha stream keyed by the master seed and a purpose tag, so results
//! do not depend on execution order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Data,
    Sharing,
    ModelInit,
    Pretrain,
    Keys,
    Release,
    Labels,
    LocalTraining,
    Envelope,
    Adversary,
    Baseline,
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for `(seed, purpose, party, round)`.
pub fn stream(seed: u64, purpose: Purpose, party: u64, round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed));
    let tag = mix(mix(mix(purpose as u64 + 1) ^ party) ^ round.rotate_left(17));
    rng.set_stream(tag);
    rng
}
