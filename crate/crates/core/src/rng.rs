//! Deterministic random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere in the crate. Seeded explicitly, never from entropy.
pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replica `index` of a campaign started from `master`.
///
/// Depends only on the pair, so adding replicas never perturbs earlier ones.
pub fn replica_seed(master: u64, index: u64) -> u64 {
    mix(mix(master) ^ mix(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Independent sub-stream of a seed, e.g. one for training and one for evaluation.
pub fn substream(seed: u64, tag: u64) -> u64 {
    mix(seed ^ mix(tag))
}
