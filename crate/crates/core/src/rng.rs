//! Named seed derivation.
//!
//! Every random stream in the toolkit is obtained from a master seed plus a
//! `(component, index)` pair, so work split across threads draws the same
//! numbers as a serial run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed for `component` / `index` from `master`.
pub fn derive_seed(master: u64, component: &str, index: u64) -> u64 {
    let h = splitmix64(master ^ fnv1a(component.as_bytes()));
    splitmix64(h ^ splitmix64(index))
}

/// A ChaCha8 stream for `component` / `index` under `master`.
pub fn stream(master: u64, component: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, component, index))
}
