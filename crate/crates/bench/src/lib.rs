//! Shared fixtures for the criterion benches.

use bnl_core::rng::item_rng;
use bnl_core::TruthTable;

/// `count` seeded random functions of `n` variables.
pub fn random_tables(n: u32, count: usize, seed: u64) -> Vec<TruthTable> {
    (0..count as u64)
        .map(|i| TruthTable::random(n, &mut item_rng(seed, "bench", i)).expect("valid arity"))
        .collect()
}
