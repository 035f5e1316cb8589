//! Seeded random number generation.
//!
//! All randomness flows through [`ChaCha8Rng`], the 8-round ChaCha stream
//! cipher used as a counter-based generator. `seed_from_u64` expands the
//! 64-bit seed with PCG32 into the 256-bit ChaCha key, which is a documented
//! and portable procedure, so identical seeds produce identical streams on
//! every platform. Independent consumers of the same seed (generation,
//! splitting, resampling, restarts) read from distinct ChaCha streams so that
//! changing one stage never shifts the random numbers seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// User-visible seed. Same seed plus same config gives bit-identical output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RandomSeed(pub u64);

impl Default for RandomSeed {
    fn default() -> Self {
        RandomSeed(42)
    }
}

impl From<u64> for RandomSeed {
    fn from(v: u64) -> Self {
        RandomSeed(v)
    }
}

/// Stream identifiers for the different consumers of a seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Generate = 1,
    Split = 2,
    Resample = 3,
    KMeans = 4,
    Exemplar = 5,
}

impl RandomSeed {
    /// Generator for one consumer of this seed.
    pub fn rng(self, stream: Stream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(stream as u64);
        rng
    }

    /// Seed derived from this one for sub-run `index` (restarts, repeated
    /// trials). Uses the SplitMix64 finalizer so neighbouring indices give
    /// unrelated seeds.
    pub fn derive(self, index: u64) -> RandomSeed {
        let mut z = self
            .0
            .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RandomSeed(z ^ (z >> 31))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_seed_same_stream() {
        let a: Vec<u64> = (0..8)
            .map(|_| RandomSeed(7).rng(Stream::Generate).random())
            .collect();
        let mut r = RandomSeed(7).rng(Stream::Generate);
        let first: u64 = r.random();
        assert!(a.iter().all(|&x| x == first));
    }

    #[test]
    fn streams_differ() {
        let x: u64 = RandomSeed(7).rng(Stream::Generate).random();
        let y: u64 = RandomSeed(7).rng(Stream::Split).random();
        assert_ne!(x, y);
    }

    #[test]
    fn derive_is_deterministic_and_spreads() {
        assert_eq!(RandomSeed(1).derive(3), RandomSeed(1).derive(3));
        assert_ne!(RandomSeed(1).derive(3), RandomSeed(1).derive(4));
    }
}
