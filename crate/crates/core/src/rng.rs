//! Deterministic random-number plumbing.
//!
//! All randomness flows from a single master seed through named per-purpose
//! substreams, so adding one report to a run never perturbs the numbers of
//! another. Substream seeds are derived with FNV-1a over the master seed and
//! the purpose label, which is stable across platforms and builds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::util::C64;

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut h = FNV_OFFSET;
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Substream seed = hash(master seed, purpose label).
pub fn substream_seed(master: u64, label: &str) -> u64 {
    fnv1a(
        master
            .to_le_bytes()
            .into_iter()
            .chain(label.bytes()),
    )
}

/// Seeded generator for the named substream.
pub fn substream_rng(master: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(master, label))
}

/// One draw of a standard circularly-symmetric complex Gaussian CN(0, 1).
pub fn complex_gaussian<R: rand::Rng>(rng: &mut R) -> C64 {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * scale, im * scale)
}
