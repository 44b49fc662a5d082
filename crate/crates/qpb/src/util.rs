//! Small shared helpers: seed derivation and numeric formatting.

/// One round of splitmix64; the standard finalizer used to spread seed bits.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and a list of tags.
///
/// Experiments use this to give every (run, template, purpose) tuple its own
/// independent, reproducible random stream.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut z = splitmix64(base);
    for &t in tags {
        z = splitmix64(z ^ t.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    }
    z
}

/// Formats a float with the given number of significant digits, using '.' as
/// the decimal separator regardless of locale (scientific notation).
pub fn fmt_sig(x: f64, significant: usize) -> String {
    format!("{:.*e}", significant.saturating_sub(1), x)
}
