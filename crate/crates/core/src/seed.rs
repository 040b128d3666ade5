//! Named random substreams.
//!
//! Every stochastic stage draws from its own stream derived from the global
//! seed and a stage name, so adding draws to one stage never perturbs another.
//! Derivation: first eight bytes (little endian) of
//! `SHA-256("<global seed as decimal>/<name>")`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub const SYNTH: &str = "synth";
pub const SPLIT: &str = "split";
pub const FOLDS: &str = "folds";
pub const BOOTSTRAP: &str = "bootstrap";
pub const MOCK: &str = "mock";

pub fn substream(seed: u64, name: &str) -> u64 {
    let digest = Sha256::digest(format!("{seed}/{name}").as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream_rng(seed: u64, name: &str) -> ChaCha8Rng {
    rng(substream(seed, name))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substreams_differ_by_name_and_seed() {
        assert_ne!(substream(1, SPLIT), substream(1, FOLDS));
        assert_ne!(substream(1, SPLIT), substream(2, SPLIT));
        assert_eq!(substream(9, SYNTH), substream(9, SYNTH));
    }
}
