//! Deterministic derivation of per-purpose RNG seeds.
//!
//! Every random choice in the pipeline draws from a `ChaCha8Rng` seeded by
//! mixing a base seed with the identifiers of the thing being randomized
//! (configuration key, purpose tag, run seed). Mixing is a SplitMix64 fold,
//! so derived streams are decorrelated and independent of evaluation order.

/// One SplitMix64 scramble round.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `parts` into a single seed. Order-sensitive.
pub fn mix(parts: &[u64]) -> u64 {
    let mut acc = 0x243f_6a88_85a3_08d3; // arbitrary nonzero start
    for &p in parts {
        acc = splitmix64(acc ^ p);
    }
    acc
}

/// Tags that keep unrelated random streams apart. Values are arbitrary but
/// must never change once data has been generated with them.
pub mod tag {
    pub const DATA_MEANS: u64 = 1;
    pub const DATA_SAMPLES: u64 = 2;
    pub const DATA_NOISE: u64 = 3;
    pub const DATA_SHIFT: u64 = 4;
    pub const TRAIN_SHUFFLE: u64 = 6;
    pub const HUTCHINSON: u64 = 7;
    pub const POWER_ITER: u64 = 8;
    pub const CURVE: u64 = 9;
    pub const CKA: u64 = 10;
    pub const VAL_STREAM: u64 = 11;
    pub const SPLIT_RESAMPLE: u64 = 12;
    pub const RANDOM_DIAG: u64 = 13;
    pub const RANDOM_STEP: u64 = 14;
    pub const SPLIT_DRAW: u64 = 15;
}

/// Mixes a configuration key (width, batch, fraction) into seed parts.
pub fn config_parts(width: usize, batch: usize, fraction: f64) -> [u64; 3] {
    [width as u64, batch as u64, fraction.to_bits()]
}
