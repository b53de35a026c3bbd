//! Shared inputs for the benchmarks.

use assembler_core::{
    build_reservoir_with_target, sample_loading, Embedding, LatticeKind, LoadingParams, Occupancy,
    TargetPattern, TrapArray,
};

/// Compact square reservoir for a target of `n` sites and one loading with enough atoms.
pub fn loaded_reservoir(
    n: usize,
    embedding: Embedding,
    spacing: f64,
) -> (TrapArray, TargetPattern, Occupancy) {
    let (array, pattern) =
        build_reservoir_with_target(LatticeKind::Square, n, embedding, spacing).unwrap();
    let occ = (0..)
        .map(|seed| sample_loading(&array, &LoadingParams::default(), seed).unwrap())
        .find(|o| o.atom_count() >= pattern.len())
        .unwrap();
    (array, pattern, occ)
}
