//! Counter-based randomness streams for reproducible parallel sampling.
//!
//! Every (shot, stage) pair addresses its own fixed window of a ChaCha12
//! stream derived from the master seed, so outcomes are independent of
//! execution order and worker count, and a conditioned sampler can replay
//! exactly the draws an unconditioned shot would have used.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// 32-bit words reserved per stage; enough for eight u64 draws.
const WORDS_PER_STAGE: u128 = 16;

/// Auxiliary streams (used for conditioned-mode gap sampling) live in the
/// upper half of the stream-id space, far away from any shot index.
const AUX_STREAM_BASE: u64 = 1 << 63;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug)]
pub struct ShotStreams {
    root: [u8; 32],
}

impl ShotStreams {
    pub fn new(master_seed: u64) -> Self {
        let mut state = master_seed;
        let mut root = [0u8; 32];
        for chunk in root.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        Self { root }
    }

    /// RNG positioned at the start of `stage`'s window within `shot`'s stream.
    pub fn stage_rng(&self, shot: u64, stage: u32) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::from_seed(self.root);
        rng.set_stream(shot);
        rng.set_word_pos(stage as u128 * WORDS_PER_STAGE);
        rng
    }

    /// Independent stream for the k-th auxiliary draw sequence.
    pub fn aux_rng(&self, k: u64) -> ChaCha12Rng {
        debug_assert!(k < AUX_STREAM_BASE);
        let mut rng = ChaCha12Rng::from_seed(self.root);
        rng.set_stream(AUX_STREAM_BASE | k);
        rng
    }
}
