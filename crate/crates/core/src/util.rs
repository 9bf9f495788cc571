/// Derives a per-entity RNG seed from a run seed and a string tag (FNV-1a).
///
/// Splitting and generation derive one independent stream per user from
/// `(seed, user_id)`, so the amount of parallelism never perturbs results.
pub(crate) fn derive_seed(seed: u64, tag: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    for byte in seed.to_le_bytes().iter().chain(tag.as_bytes()) {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(PRIME);
    }
    hash
}

/// Median of a sorted slice; even counts average the two middle values.
pub(crate) fn median_of_sorted(sorted: &[i64]) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64) / 2.0
    }
}
