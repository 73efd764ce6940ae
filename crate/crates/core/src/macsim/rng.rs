//! Seeded, order-independent random streams.
//!
//! Every random draw belongs to a `(seed, domain, index)` substream, so a
//! trial's randomness does not depend on which thread runs it or on how many
//! trials ran before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Independent uses of the same seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Domain {
    Codebook = 1,
    MacTrial = 2,
    Profile = 3,
    IcTrial = 4,
    IcAnchor = 5,
    Identity = 6,
    Scan = 7,
}

const INDEX_BITS: u32 = 56;

/// Generator for one substream. `index` must be below `2^56`.
pub fn substream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    debug_assert!(index < 1 << INDEX_BITS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << INDEX_BITS) | (index & ((1 << INDEX_BITS) - 1)));
    rng
}

/// Two-level index for substreams keyed by a pair, e.g. (source, message).
pub fn pair_index(a: u64, b: u64) -> u64 {
    (a << 40) | (b & ((1 << 40) - 1))
}

pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn fill_standard_normal<R: rand::Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out {
        *v = StandardNormal.sample(rng);
    }
}
