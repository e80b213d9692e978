//! Reproducible random streams.
//!
//! Every random quantity in the toolkit is drawn from a ChaCha8 generator
//! keyed by a `(seed, stream)` pair. ChaCha is counter based, so distinct
//! streams are independent and a trial's draws never depend on how trials
//! were scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub const fn new(seed: u64, stream: u64) -> Self {
        RngSeed { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Child stream for sub-task `index` (trial number, sweep point, ...).
    pub fn derive(&self, index: u64) -> RngSeed {
        RngSeed {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }
}

impl From<u64> for RngSeed {
    fn from(seed: u64) -> Self {
        RngSeed::new(seed, 0)
    }
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Probability as a threshold on a uniform `u32`: `u < threshold` happens
/// with probability `p` exactly when `p * 2^32` is an integer.
pub(crate) fn threshold(p: f64) -> u64 {
    (p.clamp(0.0, 1.0) * 4_294_967_296.0).round() as u64
}
