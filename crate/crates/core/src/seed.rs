//! Deterministic seed derivation for nested Monte Carlo structure.
//!
//! Replicates, training batches and figure panels each draw from their own
//! derived seed so that results are independent of scheduling order and so
//! that disjoint purposes never share a stream.

/// SplitMix64 step; the standard seeding finalizer.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `(master, purpose, index)`. Order-sensitive, so
/// `(a, b)` and `(b, a)` give unrelated streams.
pub fn derive_seed(master: u64, purpose: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ purpose) ^ index)
}

/// Purpose tags for [`derive_seed`].
pub mod purpose {
    pub const TRAINING: u64 = 1;
    pub const SCORING: u64 = 2;
    pub const FIG_COHERENCE: u64 = 3;
    pub const FIG_DEVIATION: u64 = 4;

    /// Within one simulation call, trial `k` uses `derive_seed(seed, TRIAL, k)`.
    pub const TRIAL: u64 = 0x5452_4941;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_inputs_distinct_seeds() {
        let a = derive_seed(7, 1, 0);
        let b = derive_seed(7, 1, 1);
        let c = derive_seed(7, 2, 0);
        let d = derive_seed(8, 1, 0);
        assert!(a != b && a != c && a != d && b != c);
    }

    #[test]
    fn deterministic() {
        assert_eq!(derive_seed(42, 3, 9), derive_seed(42, 3, 9));
    }
}
