//! Repeated load -> plan -> execute trials and the statistics built on them.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    build_reservoir_with_target, Embedding, LatticeKind, TargetPattern, TrapArray,
};
use crate::loading::{wait_for_trigger, LoadingParams};
use crate::physics::{configuration_lifetime, execute, PhysicsParams};
use crate::planner::{plan, PlannerOptions};
use crate::rng::derive_seed;
use crate::stats::{fit_power_law, mean, std_dev, wilson_interval, PowerLawFit};

const Z_95: f64 = 1.959_963_984_540_054;

/// Everything a single trial needs besides its seed.
#[derive(Clone, Copy, Debug)]
pub struct TrialSetup<'a> {
    pub array: &'a TrapArray,
    pub pattern: &'a TargetPattern,
    pub planner: PlannerOptions,
    pub loading: LoadingParams,
    pub physics: PhysicsParams,
}

/// One simulated experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub n_target: usize,
    pub n_traps: usize,
    pub initial_atoms: usize,
    pub trigger_cycles: u64,
    pub n_moves: usize,
    pub n_fill_moves: usize,
    pub n_disposals: usize,
    pub n_substitutions: usize,
    pub path_length: f64,
    /// Duration of the moves that fill target sites, s.
    pub fill_time: f64,
    /// Duration of all moves including disposals, s.
    pub move_time: f64,
    /// Moves plus final image (and overhead), s.
    pub elapsed: f64,
    pub transfer_losses: usize,
    pub vacuum_losses: usize,
    pub filled_targets: usize,
    pub eta: f64,
    pub defect_free: bool,
}

/// Which duration counts as "assembly time".
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssemblyClock {
    /// Moves that fill target sites.
    FillMoves,
    /// All moves, disposals included.
    AllMoves,
    /// All moves, overhead and the final image.
    Elapsed,
}

impl AssemblyClock {
    pub fn read(self, r: &TrialRecord) -> f64 {
        match self {
            AssemblyClock::FillMoves => r.fill_time,
            AssemblyClock::AllMoves => r.move_time,
            AssemblyClock::Elapsed => r.elapsed,
        }
    }
}

pub fn run_trial(setup: &TrialSetup<'_>, trial: usize, base_seed: u64) -> Result<TrialRecord> {
    let seed = derive_seed(base_seed, trial as u64);
    let wrap = |e: Error| Error::Trial {
        trial,
        source: Box::new(e),
    };

    let trigger = wait_for_trigger(
        setup.array,
        setup.pattern,
        &setup.loading,
        derive_seed(seed, 0),
    )
    .map_err(wrap)?;
    let plan = plan(
        setup.array,
        &trigger.occupancy,
        setup.pattern,
        &setup.planner,
    )
    .map_err(wrap)?;
    let result = execute(
        setup.array,
        &trigger.occupancy,
        &plan,
        &setup.physics,
        derive_seed(seed, 1),
    )
    .map_err(wrap)?;

    let n_target = setup.pattern.len();
    let filled_targets = result.final_occupancy.count_filled_in(setup.pattern);
    Ok(TrialRecord {
        trial,
        seed,
        n_target,
        n_traps: setup.array.len(),
        initial_atoms: trigger.occupancy.atom_count(),
        trigger_cycles: trigger.cycles,
        n_moves: plan.stats.n_moves,
        n_fill_moves: plan.stats.n_fill_moves,
        n_disposals: plan.stats.n_disposals,
        n_substitutions: plan.stats.n_obstacle_substitutions,
        path_length: plan.stats.total_path_length,
        fill_time: result.fill_time,
        move_time: result.move_time,
        elapsed: result.elapsed,
        transfer_losses: result.transfer_losses(),
        vacuum_losses: result.vacuum_losses.len(),
        filled_targets,
        eta: filled_targets as f64 / n_target as f64,
        defect_free: filled_targets == n_target,
    })
}

/// Runs `n_trials` independent trials in parallel. Trial `i` is seeded from
/// `(base_seed, i)` only, so results do not depend on scheduling.
pub fn run_trials(
    setup: &TrialSetup<'_>,
    n_trials: usize,
    base_seed: u64,
) -> Result<Vec<TrialRecord>> {
    if n_trials == 0 {
        return Err(Error::validation("n_trials must be >= 1"));
    }
    setup.planner.validate()?;
    setup.loading.validate()?;
    setup.physics.validate()?;
    (0..n_trials)
        .into_par_iter()
        .map(|i| run_trial(setup, i, base_seed))
        .collect()
}

/// Statistics over the trials of one target size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n_target: usize,
    pub n_traps: usize,
    pub n_trials: usize,
    pub mean_eta: f64,
    pub std_eta: f64,
    pub p_defect_free: f64,
    pub p_defect_free_ci: (f64, f64),
    /// Probability that random loading alone gives a defect-free array, `2^-N`.
    pub random_loading_baseline: f64,
    pub mean_fill_moves: f64,
    pub mean_substitutions: f64,
    pub mean_disposals: f64,
    pub mean_fill_time: f64,
    pub mean_move_time: f64,
    pub mean_elapsed: f64,
}

impl Aggregate {
    /// `records` must be non-empty and share one target size.
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let first = &records[0];
        let col = |f: fn(&TrialRecord) -> f64| -> Vec<f64> { records.iter().map(f).collect() };
        let etas = col(|r| r.eta);
        let successes = records.iter().filter(|r| r.defect_free).count();
        Aggregate {
            n_target: first.n_target,
            n_traps: first.n_traps,
            n_trials: records.len(),
            mean_eta: mean(&etas),
            std_eta: std_dev(&etas),
            p_defect_free: successes as f64 / records.len() as f64,
            p_defect_free_ci: wilson_interval(successes, records.len(), Z_95),
            random_loading_baseline: 0.5f64.powi(first.n_target as i32),
            mean_fill_moves: mean(&col(|r| r.n_fill_moves as f64)),
            mean_substitutions: mean(&col(|r| r.n_substitutions as f64)),
            mean_disposals: mean(&col(|r| r.n_disposals as f64)),
            mean_fill_time: mean(&col(|r| r.fill_time)),
            mean_move_time: mean(&col(|r| r.move_time)),
            mean_elapsed: mean(&col(|r| r.elapsed)),
        }
    }

    pub fn mean_time(&self, clock: AssemblyClock) -> f64 {
        match clock {
            AssemblyClock::FillMoves => self.mean_fill_time,
            AssemblyClock::AllMoves => self.mean_move_time,
            AssemblyClock::Elapsed => self.mean_elapsed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub aggregates: Vec<Aggregate>,
    pub trials: Vec<TrialRecord>,
}

impl StudyResult {
    pub fn aggregate_for(&self, n_target: usize) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.n_target == n_target)
    }
}

/// Reservoir family and run parameters shared by the size sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub kind: LatticeKind,
    pub embedding: Embedding,
    pub spacing: f64,
    #[serde(default)]
    pub planner: PlannerOptions,
    #[serde(default)]
    pub loading: LoadingParams,
    #[serde(default)]
    pub physics: PhysicsParams,
    pub n_trials: usize,
    pub base_seed: u64,
}

/// Runs the trials for every target size in `n_list`. Each size gets its own
/// seed stream derived from `base_seed` and the size.
pub fn eta_vs_n(config: &StudyConfig, n_list: &[usize]) -> Result<StudyResult> {
    if n_list.is_empty() {
        return Err(Error::validation("empty list of target sizes"));
    }
    let mut aggregates = Vec::with_capacity(n_list.len());
    let mut trials = Vec::new();
    for &n in n_list {
        let (array, pattern) =
            build_reservoir_with_target(config.kind, n, config.embedding, config.spacing)?;
        let setup = TrialSetup {
            array: &array,
            pattern: &pattern,
            planner: config.planner,
            loading: config.loading,
            physics: config.physics,
        };
        let records = run_trials(
            &setup,
            config.n_trials,
            derive_seed(config.base_seed, n as u64),
        )?;
        aggregates.push(Aggregate::from_records(&records));
        trials.extend(records);
    }
    Ok(StudyResult { aggregates, trials })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    pub embedding: Embedding,
    pub clock: AssemblyClock,
    /// Sizes below this are left out of the fit.
    pub fit_min_n: usize,
    pub fit: PowerLawFit,
    /// Size at which the fitted assembly time equals `tau_vac / N`.
    pub crossover_n: f64,
    pub study: StudyResult,
}

/// Mean assembly time versus target size on square reservoirs with type-2
/// moves, with a log-log power-law fit over sizes `>= fit_min_n`.
pub fn assembly_time_scaling(
    config: &StudyConfig,
    n_list: &[usize],
    clock: AssemblyClock,
    fit_min_n: usize,
) -> Result<ScalingResult> {
    let config = StudyConfig {
        kind: LatticeKind::Square,
        planner: PlannerOptions {
            mode: crate::planner::MoveMode::Type2,
            ..config.planner
        },
        ..*config
    };
    let points: Vec<usize> = n_list.iter().copied().filter(|&n| n >= fit_min_n).collect();
    if points.len() < 3 {
        return Err(Error::Fit(points.len()));
    }
    let study = eta_vs_n(&config, n_list)?;
    let xy: Vec<(f64, f64)> = study
        .aggregates
        .iter()
        .filter(|a| a.n_target >= fit_min_n)
        .map(|a| (a.n_target as f64, a.mean_time(clock)))
        .collect();
    let fit = fit_power_law(&xy)?;
    // prefactor * N^k = tau_vac / N
    let crossover_n = (config.physics.tau_vac / fit.prefactor).powf(1.0 / (fit.exponent + 1.0));
    Ok(ScalingResult {
        embedding: config.embedding,
        clock,
        fit_min_n,
        fit,
        crossover_n,
        study,
    })
}

/// Configuration lifetime `tau_vac / N` next to each measured size.
pub fn lifetimes(study: &StudyResult, physics: &PhysicsParams) -> Vec<(usize, f64)> {
    study
        .aggregates
        .iter()
        .map(|a| {
            (
                a.n_target,
                configuration_lifetime(a.n_target, physics).unwrap_or(f64::NAN),
            )
        })
        .collect()
}

/// Provenance stamped on every output file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub base_seed: u64,
}

const CSV_HEADER: [&str; 21] = [
    "config_hash",
    "base_seed",
    "trial",
    "seed",
    "n_target",
    "n_traps",
    "initial_atoms",
    "trigger_cycles",
    "n_moves",
    "n_fill_moves",
    "n_disposals",
    "n_substitutions",
    "path_length_um",
    "fill_time_s",
    "move_time_s",
    "elapsed_s",
    "transfer_losses",
    "vacuum_losses",
    "filled_targets",
    "eta",
    "defect_free",
];

fn csv_fields(p: &Provenance, r: &TrialRecord) -> [String; 21] {
    [
        p.config_hash.clone(),
        p.base_seed.to_string(),
        r.trial.to_string(),
        r.seed.to_string(),
        r.n_target.to_string(),
        r.n_traps.to_string(),
        r.initial_atoms.to_string(),
        r.trigger_cycles.to_string(),
        r.n_moves.to_string(),
        r.n_fill_moves.to_string(),
        r.n_disposals.to_string(),
        r.n_substitutions.to_string(),
        r.path_length.to_string(),
        r.fill_time.to_string(),
        r.move_time.to_string(),
        r.elapsed.to_string(),
        r.transfer_losses.to_string(),
        r.vacuum_losses.to_string(),
        r.filled_targets.to_string(),
        r.eta.to_string(),
        r.defect_free.to_string(),
    ]
}

/// One CSV row per trial, each stamped with the provenance.
pub fn write_trials_csv<W: Write>(
    out: W,
    provenance: &Provenance,
    trials: &[TrialRecord],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in trials {
        w.write_record(csv_fields(provenance, r))?;
    }
    w.flush()?;
    Ok(())
}
