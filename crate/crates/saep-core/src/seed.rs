//! Deterministic seed derivation.
//!
//! Every random stream in a search run (candidate initialization, batch
//! shuffling, prune-criterion draws, synthetic data) is seeded from one
//! master seed through [`derive`], so a run is fully reproducible from a
//! single 64-bit value and independent streams never alias each other.

/// One round of the splitmix64 mixing function.
///
/// Used as the avalanche step when deriving child seeds; its output is also
/// suitable as a direct seed for `ChaCha8Rng::seed_from_u64`.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a stream of tag values.
///
/// Tags identify the consumer (iteration index, branch, role constant); the
/// same `(master, tags)` pair always yields the same child seed, and
/// different tag paths yield statistically independent ones.
pub fn derive(master: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &tag in tags {
        state = splitmix64(state ^ splitmix64(tag));
    }
    state
}

/// Role constants for [`derive`] tag paths, kept in one place so no two
/// consumers can collide on the same stream.
pub mod role {
    /// Candidate network parameter initialization.
    pub const NET_INIT: u64 = 1;
    /// Mini-batch shuffling during candidate training.
    pub const TRAIN_SHUFFLE: u64 = 2;
    /// Per-iteration prune-criterion randomness.
    pub const PRUNE: u64 = 3;
}
