//! Portable random streams.
//!
//! All randomness goes through [`PortableRng`], xoshiro256++ seeded via
//! SplitMix64 (`seed_from_u64`). Both algorithms are fixed-constant integer
//! recurrences, so a seed yields the same stream on every platform. Floats
//! are drawn as `(next_u64 >> 11) * 2^-53`.

use rand::{Rng, SeedableRng};

pub use rand_xoshiro::Xoshiro256PlusPlus as PortableRng;

pub fn seeded(seed: u64) -> PortableRng {
    PortableRng::seed_from_u64(seed)
}

/// Mixes `stream` into `seed` (SplitMix64 finalizer) to get independent
/// child seeds for sub-computations.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw in `[0, 1)` with 53 bits of precision.
#[inline]
pub fn unit(rng: &mut PortableRng) -> f64 {
    (rng.gen::<u64>() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Samples an index from a probability vector by inversion.
pub fn categorical(rng: &mut PortableRng, probs: &[f64]) -> usize {
    let r = unit(rng);
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if r < acc {
            return i;
        }
    }
    // rounding can leave acc slightly below one
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}
