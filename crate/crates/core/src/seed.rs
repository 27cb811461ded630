//! Seed derivation for schedule-independent randomness.
//!
//! Every random stream in the crate is keyed by a tuple of integers
//! (master seed, cell index, trial, row, ...). The key is folded through
//! splitmix64 so that nearby tuples give unrelated streams.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type StreamRng = Xoshiro256PlusPlus;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a key tuple into a single 64-bit seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243F_6A88_85A3_08D3_u64, |acc, &p| {
            splitmix64(acc ^ splitmix64(p).rotate_left(17))
        })
}

pub fn stream(parts: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(parts))
}

// Domain tags keep streams used for different purposes apart.
pub(crate) const TAG_ROW: u64 = 0x524f_57;
pub(crate) const TAG_PAIR: u64 = 0x5041_4952;
pub(crate) const TAG_TRIAL: u64 = 0x5452_4941_4c;
pub(crate) const TAG_DATA: u64 = 0x4441_5441;
pub(crate) const TAG_SPLIT: u64 = 0x5350_4c49_54;
