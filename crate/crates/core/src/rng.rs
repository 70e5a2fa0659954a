//! Counter-derived random streams.
//!
//! Every random decision in the crate draws from a ChaCha8 stream keyed by a
//! master seed and a small tuple of counters (domain, replicate, sweep,
//! chunk...). Work split across threads therefore consumes exactly the same
//! numbers regardless of how many workers run it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains; keeps streams of unrelated operations apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Degrees = 1,
    Topology = 2,
    Couplings = 3,
    PowerIteration = 4,
    CavitySeed = 5,
    Population = 6,
    FullDistribution = 7,
    Replicate = 8,
    Tree = 9,
    Coupling = 10,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a sequence of counters into a new 64-bit seed.
pub fn derive_seed(seed: u64, counters: &[u64]) -> u64 {
    let mut state = seed;
    let mut out = splitmix64(&mut state);
    for &c in counters {
        state ^= c.wrapping_mul(0xD6E8_FEB8_6659_FD93);
        out ^= splitmix64(&mut state);
    }
    out
}

/// A ChaCha8 generator for `(seed, domain)` positioned on stream `stream`.
pub fn stream(seed: u64, domain: Domain, stream: u64) -> ChaCha8Rng {
    let mut key_state = seed ^ (domain as u64).rotate_left(40);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut key_state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// Packs two 32-bit counters into one stream id.
pub fn pack(hi: u64, lo: u64) -> u64 {
    (hi << 32) | (lo & 0xFFFF_FFFF)
}
