//! Seed derivation.
//!
//! Every random quantity in a run is drawn from a ChaCha8 stream whose 64-bit
//! seed is derived from the run's master seed. The rule is fixed and must not
//! change between releases, since saved results are reproduced from it:
//!
//! * `derive_seed(master, index) = mix(master ⊕ mix(index + 0x9E37_79B9_7F4A_7C15))`
//!   where `mix` is the SplitMix64 finalizer. Scan points use `index = step`.
//! * Within one interval the sub-streams use `derive_seed(seed, tag)` with the
//!   [`Stream`] tags below, so that changing one stage (for example detector
//!   efficiency) never perturbs the draws of another (outcome sampling).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 output function.
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix(master ^ mix(index.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

/// Independent random streams used inside one interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Emission,
    Outcome,
    Detection,
    /// Dark counts of detector `k` (0..4).
    Dark(u8),
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Emission => 0x454D_4954,
            Stream::Outcome => 0x4F55_5443,
            Stream::Detection => 0x4445_5445,
            Stream::Dark(k) => 0x4441_5200 + k as u64,
        }
    }
}

pub fn stream_rng(seed: u64, stream: Stream) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, stream.tag()))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
