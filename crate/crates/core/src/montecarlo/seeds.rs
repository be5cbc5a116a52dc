use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Root of all simulation randomness.
///
/// The stream for `(player, win, replicate)` is a ChaCha8 generator keyed by
/// the 32 bytes
///
/// ```text
/// master_seed (u64 LE) ‖ first 8 bytes of SHA-256(player_id) ‖ win_index (u64 LE) ‖ replicate (u64 LE)
/// ```
///
/// Distinct triples therefore get distinct keys (up to a 64-bit collision of
/// player-id digests), and every stream is a pure function of its triple:
/// no generator state is shared between tasks, so results do not depend on
/// scheduling or thread count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    /// Stream for one simulated win of one replicate.
    pub fn stream(&self, player_id: &str, win_index: usize, replicate: usize) -> ChaCha8Rng {
        self.stream_for_key(player_key(player_id), win_index, replicate)
    }

    /// As [`stream`](Self::stream), with the player digest precomputed.
    pub fn stream_for_key(&self, player: u64, win_index: usize, replicate: usize) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&player.to_le_bytes());
        key[16..24].copy_from_slice(&(win_index as u64).to_le_bytes());
        key[24..32].copy_from_slice(&(replicate as u64).to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }

    /// Generator for an auxiliary task identified by a label and an index
    /// (k-means restarts, synthetic players, ...).
    pub fn aux_stream(&self, label: &str, index: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&player_key(label).to_le_bytes());
        key[16..24].copy_from_slice(&index.to_le_bytes());
        key[24..32].copy_from_slice(&u64::MAX.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }
}

/// First 8 bytes of SHA-256 of the player id, little endian.
pub fn player_key(player_id: &str) -> u64 {
    let digest = Sha256::digest(player_id.as_bytes());
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(b)
}
