//! Counter-keyed random streams. Every random draw in the engine comes from a
//! ChaCha stream whose key is derived from a tuple of integers (and strings),
//! so results do not depend on call order, thread scheduling or platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a, used to fold string labels into stream keys.
pub fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn mix(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x005E_ED0F_5A11_u64, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// A fresh generator for the given key.
pub fn stream(parts: &[u64]) -> ChaCha8Rng {
    let key = mix(parts);
    let mut seed = [0u8; 32];
    for (i, chunk) in seed.chunks_mut(8).enumerate() {
        chunk.copy_from_slice(&splitmix64(key.wrapping_add(i as u64)).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

// Stream purposes, folded into keys so unrelated draws never share a stream.
pub(crate) const PURPOSE_RESET: u64 = 1;
pub(crate) const PURPOSE_KEYPOINT_NOISE: u64 = 2;
pub(crate) const PURPOSE_PROPOSAL: u64 = 3;
pub(crate) const PURPOSE_RETRIEVAL: u64 = 4;
