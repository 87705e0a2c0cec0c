//! Deterministic seed derivation.

/// SplitMix64 finalizer applied to `a ^ rotate(b)`; cheap and well mixed.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.rotate_left(32) ^ 0x9E37_79B9_7F4A_7C15;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a path of identifiers into one seed.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(master, 0), |acc, &p| mix(acc, p))
}
