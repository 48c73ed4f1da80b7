//! Deterministic, counter-based random number streams.
//!
//! Every sampling operation takes a 64-bit seed plus a short list of stream
//! ids (replica index, interval index, ...). The same (seed, ids) always
//! yields the same draws, independent of scheduling, so Monte Carlo loops
//! can run replicas in any order or in parallel.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Independent substream for the given seed and id path.
pub fn substream(seed: u64, ids: &[u64]) -> ChaCha8Rng {
    let mut state = seed ^ 0xa076_1d64_78bd_642f;
    let _ = splitmix64(&mut state);
    for &id in ids {
        state ^= id.wrapping_mul(0xe703_7ed1_a0b4_28db);
        let _ = splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
