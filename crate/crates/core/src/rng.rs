//! Deterministic random stream derivation.
//!
//! All randomness in the crate flows from a `u64` master seed through
//! [`substream`]. The derivation packs the master seed and up to three
//! path labels into the 32-byte ChaCha key, so distinct paths can never
//! collide and adding a sibling stream (another agent, another trial)
//! never perturbs existing ones.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Stream labels used as the first path element of [`substream`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lane {
    /// Per-agent mechanism randomness (evaluation point, splits).
    Mechanism = 1,
    /// Scenario generation: latent draw and per-agent data.
    Scenario = 2,
    /// Strategy randomness (fabrication draws).
    Strategy = 3,
    /// Monte-Carlo trial root.
    Trial = 4,
    /// Application-layer draws (deployed subsets, sweeps).
    App = 5,
}

/// Derive an independent ChaCha stream from `master` and a path of labels.
///
/// The mapping `(master, path)` → key is injective for paths of length
/// at most three, which is all the nesting the crate uses.
pub fn substream(master: u64, path: &[u64]) -> ChaCha12Rng {
    assert!(path.len() <= 3, "stream paths deeper than 3 are not supported");
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master.to_le_bytes());
    for (i, label) in path.iter().enumerate() {
        key[8 + 8 * i..16 + 8 * i].copy_from_slice(&label.to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

/// Stream for one agent's mechanism randomness under a run-level seed.
pub fn agent_stream(master: u64, agent_id: u64) -> ChaCha12Rng {
    substream(master, &[Lane::Mechanism as u64, agent_id])
}

/// Root seed for one Monte-Carlo trial; lanes are derived from it.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    // SplitMix64 finalizer over the packed pair: cheap, well mixed, and
    // stable. Used only to compress (master, trial) into a new master.
    let mut z = master ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
