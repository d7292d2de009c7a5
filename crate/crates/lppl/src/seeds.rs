//! Deterministic seed derivation.
//!
//! Every parallel ensemble in this crate derives one seed per task from a
//! base seed and a task index, so results are reproducible regardless of
//! thread count or execution order.

/// SplitMix64 finalizer over `base` and `index`.
///
/// Distinct `(base, index)` pairs map to well-separated seeds; the same pair
/// always maps to the same seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
