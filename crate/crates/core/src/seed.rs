//! Deterministic RNG derivation for parallel Monte-Carlo work.
//!
//! Every simulated trial draws from a ChaCha12 stream derived from a master
//! seed, a component label, and the trial index. Streams are independent of
//! scheduling, so studies aggregate identically for any worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// SplitMix64 step; used to spread label entropy over the master seed.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// RNG for stream `index` of component `label` under `master`.
///
/// `label` namespaces independent parts of a study (tissue × SNR cell,
/// candidate id, voxel block) so trial indices never collide across them.
pub fn stream_rng(master: u64, label: u64, index: u64) -> ChaCha12Rng {
    let mixed = splitmix64(master ^ splitmix64(label));
    let mut rng = ChaCha12Rng::seed_from_u64(mixed);
    rng.set_stream(index);
    rng
}

/// Hash a textual component label into the 64-bit label space (FNV-1a).
pub fn label(name: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in name.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
