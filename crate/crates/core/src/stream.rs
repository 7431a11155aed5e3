//! Deterministic, schedule-independent RNG streams.
//!
//! Every source of randomness in the crate draws from a stream keyed by a
//! root seed plus a list of integer tags (domain, feature index, repetition,
//! tree index, ...). Two call sites with the same key always see the same
//! stream, regardless of execution order or thread schedule. In particular,
//! the permutation applied to feature `j` in repetition `r` is shared between
//! the ALCD table and the PFI computation because both derive it from
//! [`permutation`] with the same `(seed, j, r)` key.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep streams for different purposes disjoint even when they
/// share a root seed.
pub const TAG_SPLIT: u64 = 1;
pub const TAG_BASELINE: u64 = 2;
pub const TAG_TREE: u64 = 3;
pub const TAG_PERMUTATION: u64 = 4;
pub const TAG_TRIP: u64 = 5;
pub const TAG_RELEARN: u64 = 6;
pub const TAG_RUN: u64 = 7;
pub const TAG_GENERATOR: u64 = 8;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a root seed with a sequence of tags into a new 64-bit seed.
pub fn derive(root: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(root);
    for &tag in tags {
        state = splitmix64(state ^ splitmix64(tag.wrapping_add(0xD1B5_4A32_D192_ED03)));
    }
    state
}

/// A fresh ChaCha stream for the given key.
pub fn rng(root: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(root, tags))
}

/// The uniform random permutation of `0..len` for feature `feature` and
/// repetition `repetition` under `seed`.
///
/// This is the single source of permutations for both ALCD tables and PFI,
/// which must see identical rearrangements for the same `(seed, j, r)`.
pub fn permutation(seed: u64, feature: usize, repetition: usize, len: usize) -> Vec<usize> {
    let mut rng = rng(seed, &[TAG_PERMUTATION, feature as u64, repetition as u64]);
    let mut indices: Vec<usize> = (0..len).collect();
    indices.shuffle(&mut rng);
    indices
}
