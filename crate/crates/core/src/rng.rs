//! Seed derivation for independent random streams.
//!
//! Every random source in a run is identified by a master seed, a [`Stream`]
//! tag and an index (usually the replica number). The three are hashed into
//! the seed of a fresh generator, so replicas never share state and results
//! do not depend on how replicas are scheduled across workers.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// Generator used for all simulation work.
pub type SimRng = Xoshiro256PlusPlus;

/// Purpose tag of a random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Environment,
    Walk,
    Brownian,
    OmegaSample,
    /// Free-form tag for callers that need extra independent streams.
    Custom(u32),
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Environment => 0x454e_5649,
            Stream::Walk => 0x5741_4c4b,
            Stream::Brownian => 0x4252_4f57,
            Stream::OmegaSample => 0x4f4d_4547,
            Stream::Custom(c) => 0x4355_5354_0000_0000 | u64::from(c),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `(master, stream, index)` into a 64-bit seed.
pub fn derive_seed(master: u64, stream: Stream, index: u64) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ stream.tag());
    splitmix64(b ^ index.wrapping_mul(0xd134_2543_de82_ef95))
}

pub fn stream_rng(master: u64, stream: Stream, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, stream, index))
}

/// Uniform in [0, 1) with 53 random bits.
#[inline(always)]
pub(crate) fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_differ() {
        let a = derive_seed(7, Stream::Walk, 0);
        assert_ne!(a, derive_seed(7, Stream::Walk, 1));
        assert_ne!(a, derive_seed(7, Stream::Environment, 0));
        assert_ne!(a, derive_seed(8, Stream::Walk, 0));
    }

    #[test]
    fn stream_rng_is_reproducible() {
        let mut r1 = stream_rng(3, Stream::Brownian, 11);
        let mut r2 = stream_rng(3, Stream::Brownian, 11);
        for _ in 0..100 {
            assert_eq!(r1.next_u64(), r2.next_u64());
        }
    }

    #[test]
    fn unit_f64_range() {
        assert_eq!(unit_f64(0), 0.0);
        assert!(unit_f64(u64::MAX) < 1.0);
        assert_eq!(unit_f64(1 << 63), 0.5);
    }
}
