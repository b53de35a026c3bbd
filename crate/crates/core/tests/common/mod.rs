#![allow(dead_code)]

use assembler_core::rng::rng_from_seed;
use assembler_core::{
    build_lattice, LatticeKind, MoveMode, Occupancy, PlannerOptions, TargetPattern, TrapArray,
};
use rand::seq::SliceRandom;
use rand::Rng;

pub const SOUNDNESS_KINDS: [LatticeKind; 4] = [
    LatticeKind::Square,
    LatticeKind::Triangular,
    LatticeKind::Honeycomb,
    LatticeKind::Chain,
];

pub struct Instance {
    pub array: TrapArray,
    pub initial: Occupancy,
    pub pattern: TargetPattern,
    pub options: PlannerOptions,
}

/// Random lattice, loading and target with at least as many atoms as targets.
pub fn random_instance(kind: LatticeKind, seed: u64) -> Instance {
    let mut rng = rng_from_seed(seed);
    let dims: Vec<usize> = match kind {
        LatticeKind::Chain => vec![rng.random_range(2..=25)],
        LatticeKind::Ladder => vec![rng.random_range(2..=12)],
        LatticeKind::Honeycomb => vec![rng.random_range(1..=4), rng.random_range(1..=4)],
        _ => vec![rng.random_range(1..=8), rng.random_range(2..=8)],
    };
    let array = build_lattice(kind, &dims, 5.0).unwrap();
    let n = array.len();
    let p = rng.random_range(0.2..0.9);
    let mut filled: Vec<usize> = (0..n).filter(|_| rng.random_bool(p)).collect();
    if filled.is_empty() {
        filled.push(rng.random_range(0..n));
    }
    let initial = Occupancy::from_indices(n, &filled).unwrap();
    let n_target = rng.random_range(1..=filled.len());
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(&mut rng);
    all.truncate(n_target);
    let pattern = TargetPattern::new(&array, all).unwrap();
    let mode = if rng.random_bool(0.8) {
        MoveMode::Type2
    } else {
        MoveMode::Type1
    };
    Instance {
        array,
        initial,
        pattern,
        options: PlannerOptions::with_mode(mode),
    }
}

/// All-pairs hop distances by Floyd-Warshall; `usize::MAX` when disconnected.
pub fn floyd_warshall(array: &TrapArray) -> Vec<Vec<usize>> {
    let n = array.len();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(a, b) in array.links() {
        d[a][b] = 1;
        d[b][a] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    for row in d.iter_mut() {
        for v in row.iter_mut() {
            if *v >= inf {
                *v = usize::MAX;
            }
        }
    }
    d
}
