//! Shared fixtures for the benchmarks.

use sceneact_core::worldgen::{gen_split, GenConfig, SampleRecord, Split};

/// `n` validation-split records from a fixed seed.
pub fn records(n: usize) -> Vec<SampleRecord> {
    let cfg = GenConfig { seed: 11, val: n, ..GenConfig::default() };
    gen_split(&cfg, Split::Val).expect("generation succeeds")
}
