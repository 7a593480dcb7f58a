//! Deterministic seed derivation for worker simulations and RNG streams.

/// Mixes one 64-bit value (splitmix64 finalizer).
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and a list of tags.
///
/// Identical inputs always yield the identical child seed; distinct tag
/// sequences decorrelate the derived streams.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut s = splitmix64(base);
    for &t in tags {
        s = splitmix64(s ^ t.wrapping_mul(0x9e3779b97f4a7c15));
    }
    s
}

/// Tag for simulator/demand streams.
pub const TAG_SIM: u64 = 1;
/// Tag for action-selection streams.
pub const TAG_ACTION: u64 = 2;
/// Tag for the learner's replay-sampling stream.
pub const TAG_LEARNER: u64 = 3;
/// Tag for network weight initialization.
pub const TAG_INIT: u64 = 4;
/// Tag for replay-memory refill rounds.
pub const TAG_REFILL: u64 = 5;
/// Tag for evaluation episodes.
pub const TAG_EVAL: u64 = 6;
