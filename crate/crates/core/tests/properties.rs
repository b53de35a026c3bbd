mod common;

use assembler_core::physics::execute;
use assembler_core::planner::plan;
use assembler_core::{
    build_lattice, compile, decode, link_path, lossless_execute, Calibration, LatticeKind,
    MoveTiming, Occupancy, PhysicsParams,
};
use common::{floyd_warshall, random_instance, SOUNDNESS_KINDS};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = LatticeKind> {
    prop::sample::select(SOUNDNESS_KINDS.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn plans_fill_targets_exactly(kind in kind(), seed in any::<u64>()) {
        let inst = random_instance(kind, seed);
        let p = plan(&inst.array, &inst.initial, &inst.pattern, &inst.options).unwrap();
        let fin = lossless_execute(&inst.array, &inst.initial, &p).unwrap();
        prop_assert!(fin.matches_exactly(&inst.pattern));
        prop_assert_eq!(fin.atom_count(), inst.pattern.len());
        prop_assert_eq!(p.stats.n_disposals, inst.initial.atom_count() - inst.pattern.len());
        let holes = inst.pattern.indices().iter().filter(|&&t| !inst.initial.is_filled(t)).count();
        prop_assert_eq!(p.stats.n_fill_moves - p.stats.n_obstacle_substitutions, holes);
    }

    #[test]
    fn planning_is_deterministic(kind in kind(), seed in any::<u64>()) {
        let inst = random_instance(kind, seed);
        let a = plan(&inst.array, &inst.initial, &inst.pattern, &inst.options).unwrap();
        let b = plan(&inst.array, &inst.initial, &inst.pattern, &inst.options).unwrap();
        prop_assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn plan_json_round_trips(kind in kind(), seed in any::<u64>()) {
        let inst = random_instance(kind, seed);
        let p = plan(&inst.array, &inst.initial, &inst.pattern, &inst.options).unwrap();
        let back = assembler_core::MovePlan::from_json(&p.to_json()).unwrap();
        prop_assert_eq!(back.moves.len(), p.moves.len());
        prop_assert_eq!(back.to_json(), p.to_json());
    }

    #[test]
    fn link_paths_are_shortest(kind in kind(), seed in any::<u64>()) {
        let inst = random_instance(kind, seed);
        let d = floyd_warshall(&inst.array);
        let n = inst.array.len();
        let s = (seed % n as u64) as usize;
        let t = ((seed >> 32) % n as u64) as usize;
        prop_assume!(s != t);
        let path = link_path(&inst.array, s, t).unwrap();
        prop_assert_eq!(path.len() - 1, d[s][t]);
        prop_assert_eq!(path[0], s);
        prop_assert_eq!(*path.last().unwrap(), t);
        for w in path.windows(2) {
            prop_assert!(inst.array.is_linked(w[0], w[1]));
        }
    }

    #[test]
    fn execution_conserves_atoms(kind in kind(), seed in any::<u64>()) {
        let inst = random_instance(kind, seed);
        let p = plan(&inst.array, &inst.initial, &inst.pattern, &inst.options).unwrap();
        let r = execute(&inst.array, &inst.initial, &p, &PhysicsParams::default(), seed).unwrap();
        let lost = r.transfer_losses() + r.vacuum_losses.len() + r.imaging_losses.len();
        prop_assert_eq!(r.final_occupancy.atom_count() + lost + r.disposed, inst.initial.atom_count());
        prop_assert!(r.elapsed >= r.move_time && r.move_time >= r.fill_time);
    }

    #[test]
    fn waveforms_round_trip(kind in kind(), seed in any::<u64>()) {
        let inst = random_instance(kind, seed);
        let p = plan(&inst.array, &inst.initial, &inst.pattern, &inst.options).unwrap();
        let cal = Calibration::for_array(&inst.array);
        let wf = compile(&p, &cal, &MoveTiming::default()).unwrap();
        let dec = decode(&wf, &cal).unwrap();
        prop_assert_eq!(dec.len(), p.moves.len());
        let (hx, hy) = cal.step();
        for (d, m) in dec.iter().zip(&p.moves) {
            prop_assert!((d.extract.x - m.start().x).abs() <= hx && (d.extract.y - m.start().y).abs() <= hy);
            prop_assert!((d.release.x - m.end().x).abs() <= hx && (d.release.y - m.end().y).abs() <= hy);
        }
        // duration within one sample per move
        let expected = assembler_core::physics::plan_duration(&p, &PhysicsParams::default());
        prop_assert!((wf.duration() - expected).abs() <= 1e-6 * (p.moves.len() as f64 + 1.0));
        // no position jump at nonzero intensity
        for i in 1..wf.len() {
            if wf.intensity[i] > 0 && wf.intensity[i - 1] > 0 {
                prop_assert!((wf.x[i] as i32 - wf.x[i - 1] as i32).abs() <= 1);
                prop_assert!((wf.y[i] as i32 - wf.y[i - 1] as i32).abs() <= 1);
            }
        }
    }

    #[test]
    fn occupancy_json_round_trips(mask in prop::collection::vec(any::<bool>(), 1..80)) {
        let occ = Occupancy::from_mask(mask.clone());
        let back = Occupancy::from_json(&occ.to_json(), mask.len()).unwrap();
        prop_assert_eq!(back, occ);
    }

    #[test]
    fn lattice_links_match_distance_oracle(rows in 1usize..7, cols in 2usize..7) {
        let a = build_lattice(LatticeKind::Square, &[rows, cols], 5.0).unwrap();
        for i in 0..a.len() {
            for j in (i + 1)..a.len() {
                let near = (a.position(i).unwrap().distance(a.position(j).unwrap()) - 5.0).abs() < 1e-6;
                prop_assert_eq!(a.is_linked(i, j), near);
            }
        }
    }
}
