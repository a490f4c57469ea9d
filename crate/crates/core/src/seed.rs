//! Seed derivation for independent random substreams.
//!
//! `derive_seed(parent, index)` is the SplitMix64 output function applied to
//! `parent + (index + 1) * 0x9E3779B97F4A7C15` (wrapping). Child seeds depend
//! only on the parent and the index, so work can be scheduled in any order.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(parent.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}
