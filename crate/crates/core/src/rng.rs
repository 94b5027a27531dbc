//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 keystream whose key is derived from the master
//! seed and a purpose tag, and whose stream id is the member index. A member's
//! noise therefore never depends on how many other members exist or on the
//! order in which worker threads pick them up.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share key material.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamPurpose {
    Brownian,
    Jumps,
    InitialPrimary,
    InitialPartner,
    Bootstrap,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            Self::Brownian => 0x6272_6f77,
            Self::Jumps => 0x6a75_6d70,
            Self::InitialPrimary => 0x696e_6978,
            Self::InitialPartner => 0x696e_6979,
            Self::Bootstrap => 0x626f_6f74,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for `(master seed, purpose, index)`.
pub fn stream(master_seed: u64, purpose: StreamPurpose, index: u64) -> StreamRng {
    let mut state = master_seed ^ purpose.tag().rotate_left(32);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
