//! Reproducible random streams.
//!
//! Every random quantity in an experiment comes from a ChaCha8 stream that
//! is a pure function of `(seed, purpose, sub, L, sequence_id)`:
//!
//! * the 256-bit key is four successive SplitMix64 outputs, starting from
//!   `seed` mixed with the purpose tag and the `sub` index;
//! * the 64-bit ChaCha stream id is `(L << 32) | sequence_id`.
//!
//! Streams are never shared between sequences, so results do not depend on
//! evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// What a stream is used for. Separate purposes keep, for example, the
/// Clifford draws independent of how many noise parameters are sampled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Gates = 1,
    Noise = 2,
    Shots = 3,
}

/// One SplitMix64 step.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for one sequence.
pub fn sequence_stream(
    seed: u64,
    purpose: Purpose,
    sub: u64,
    length: usize,
    sequence_id: usize,
) -> ChaCha8Rng {
    let mut state = seed ^ (purpose as u64).wrapping_mul(GOLDEN.rotate_left(17));
    state = splitmix64(&mut state) ^ sub.wrapping_mul(GOLDEN.rotate_left(31));
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(((length as u64) << 32) | (sequence_id as u64 & 0xFFFF_FFFF));
    rng
}

/// Seed for the `repeat`-th independent series; repeat 0 keeps the base seed.
pub fn repeat_seed(seed: u64, repeat: u64) -> u64 {
    if repeat == 0 {
        seed
    } else {
        let mut state = seed ^ repeat.wrapping_mul(GOLDEN);
        splitmix64(&mut state)
    }
}
