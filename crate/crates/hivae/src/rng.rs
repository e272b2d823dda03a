//! Splittable, counter-based RNG streams.
//!
//! Every random draw in the toolkit flows from a single master seed through
//! named streams, so `stream(master, "sim", agent, episode)` yields the same
//! generator regardless of the order (or parallelism) in which streams are
//! consumed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Deterministic RNG used throughout the crate.
pub type Stream = ChaCha8Rng;

/// Derives an independent stream from `(master_seed, label, indices)`.
pub fn stream(master_seed: u64, label: &str, indices: &[u64]) -> Stream {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update([label.len() as u8]);
    hasher.update(label.as_bytes());
    for ix in indices {
        hasher.update(ix.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}
