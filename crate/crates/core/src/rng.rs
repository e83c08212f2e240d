//! Seed splitting.
//!
//! Every random draw in a run comes from a ChaCha8 stream whose seed is
//! derived from the master seed plus a `(purpose, index, ...)` path. Streams
//! are addressed rather than shared, so adding a player or a run never shifts
//! anyone else's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. The discriminant is mixed into the seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    /// Run seed derived from an experiment's base seed.
    Run = 1,
    /// Buyer's initial cost estimates.
    InitialEstimate = 2,
    /// Order in which (buyer, dataset) pairs are matched within a step.
    MatchOrder = 3,
    /// Buyer's seller permutation for one dataset within a step.
    SellerDraw = 4,
    /// Noise added by a seller's pricing rule.
    SellerNoise = 5,
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` by folding in the purpose tag and each
/// path component in turn.
pub fn derive_seed(parent: u64, purpose: Purpose, path: &[u64]) -> u64 {
    let mut h = splitmix64(parent ^ splitmix64(purpose as u64));
    for &p in path {
        h = splitmix64(h ^ splitmix64(p.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

pub fn stream(parent: u64, purpose: Purpose, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parent, purpose, path))
}

/// Seed of run `k` in an experiment. Depends only on `(base_seed, k)`.
pub fn run_seed(base_seed: u64, k: u64) -> u64 {
    derive_seed(base_seed, Purpose::Run, &[k])
}
