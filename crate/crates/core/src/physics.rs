//! Stochastic execution of move plans: per-move transfer fidelity, move
//! timing, and background-gas loss of trapped atoms.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Occupancy, TrapArray};
use crate::planner::{polyline_length, Move, MovePlan, MoveType};
use crate::rng::rng_from_seed;

/// Physical parameters of the assembler. Times in s, speeds in um/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsParams {
    /// Probability that a single move delivers its atom.
    pub p_transfer: f64,
    /// Take (and release) ramp duration.
    pub tau_ramp: f64,
    /// Sweep speed of the moving tweezers.
    pub v_move: f64,
    /// Vacuum-limited single-atom lifetime.
    pub tau_vac: f64,
    /// Final fluorescence image duration.
    pub image_time: f64,
    /// Fixed dead time before the first move.
    pub serial_overhead: f64,
    /// Per-atom survival probability of the final image.
    pub image_survival: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        PhysicsParams {
            p_transfer: 0.993,
            tau_ramp: 3.0e-4,
            v_move: 1.0e4,
            tau_vac: 10.0,
            image_time: 0.050,
            serial_overhead: 0.0,
            image_survival: 1.0,
        }
    }
}

impl PhysicsParams {
    /// No transfer failures and a practically infinite vacuum lifetime.
    pub fn lossless() -> Self {
        PhysicsParams {
            p_transfer: 1.0,
            tau_vac: 1e12,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !(self.p_transfer > 0.0 && self.p_transfer <= 1.0) {
            return Err(Error::validation(format!(
                "p_transfer {} not in (0, 1]",
                self.p_transfer
            )));
        }
        if !(0.0..=1.0).contains(&self.image_survival) {
            return Err(Error::validation("image_survival not in [0, 1]"));
        }
        for (name, v) in [
            ("tau_ramp", self.tau_ramp),
            ("v_move", self.v_move),
            ("tau_vac", self.tau_vac),
            ("image_time", self.image_time),
        ] {
            if !positive(v) {
                return Err(Error::validation(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.serial_overhead >= 0.0 && self.serial_overhead.is_finite()) {
            return Err(Error::validation("serial_overhead must be >= 0"));
        }
        Ok(())
    }
}

/// Ramp up, sweep at `v_move`, ramp down.
pub fn move_duration(mv: &Move, params: &PhysicsParams) -> f64 {
    2.0 * params.tau_ramp + mv.path_length / params.v_move
}

/// Sum of all move durations of a plan.
pub fn plan_duration(plan: &MovePlan, params: &PhysicsParams) -> f64 {
    plan.moves.iter().map(|m| move_duration(m, params)).sum()
}

/// Expected lifetime of a configuration of `n_atoms` atoms.
pub fn configuration_lifetime(n_atoms: usize, params: &PhysicsParams) -> Result<f64> {
    if n_atoms == 0 {
        return Err(Error::validation(
            "configuration lifetime needs at least one atom",
        ));
    }
    Ok(params.tau_vac / n_atoms as f64)
}

/// Trap laser power for an `n`-atom target in a `2n`-trap reservoir, mW.
pub fn power_budget(n_atoms: usize) -> Result<f64> {
    const MW_PER_TRAP: f64 = 5.0;
    if n_atoms == 0 {
        return Err(Error::validation("power budget needs at least one atom"));
    }
    Ok(MW_PER_TRAP * 2.0 * n_atoms as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveOutcome {
    Success,
    TransferLoss,
    /// The source atom was already gone; the sweep ran empty.
    NoAtom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExecutionResult {
    pub final_occupancy: Occupancy,
    /// Overhead, all moves, and the final image, s.
    pub elapsed: f64,
    /// All moves including disposals, s.
    pub move_time: f64,
    /// Moves that fill target sites (no disposals), s.
    pub fill_time: f64,
    pub move_outcomes: Vec<MoveOutcome>,
    /// Trap indices whose atom was lost to background collisions.
    pub vacuum_losses: Vec<usize>,
    /// Trap indices whose atom was lost during the final image.
    pub imaging_losses: Vec<usize>,
    pub disposed: usize,
}

impl ExecutionResult {
    pub fn transfer_losses(&self) -> usize {
        self.move_outcomes
            .iter()
            .filter(|&&o| o == MoveOutcome::TransferLoss)
            .count()
    }
}

/// Checks one move against the lossless occupancy and applies it.
/// `check_path` additionally enforces type-2 path rules.
fn apply_lossless(
    array: &TrapArray,
    occupancy: &mut Occupancy,
    index: usize,
    mv: &Move,
    check_path: bool,
) -> Result<()> {
    let fail = |reason: String| Error::PlanIntegrity { index, reason };
    let n = array.len();
    if mv.source >= n {
        return Err(fail(format!("source trap {} out of range", mv.source)));
    }
    if !occupancy.is_filled(mv.source) {
        return Err(fail(format!("extracting from empty trap {}", mv.source)));
    }
    if mv.path.len() < 2 {
        return Err(fail("path has fewer than two waypoints".into()));
    }
    match (mv.kind, mv.target) {
        (MoveType::Disposal, None) => {}
        (MoveType::Type1 | MoveType::Type2, Some(t)) => {
            if t >= n {
                return Err(fail(format!("target trap {t} out of range")));
            }
            if occupancy.is_filled(t) {
                return Err(fail(format!("releasing into filled trap {t}")));
            }
        }
        _ => return Err(fail("move type does not match its target".into())),
    }

    if check_path {
        const TOL: f64 = 1e-6;
        if mv.start().distance(array.traps()[mv.source]) > TOL {
            return Err(fail("path does not start at the source trap".into()));
        }
        if let Some(t) = mv.target {
            if mv.end().distance(array.traps()[t]) > TOL {
                return Err(fail("path does not end at the target trap".into()));
            }
        }
        let expected = polyline_length(&mv.path);
        if (expected - mv.path_length).abs() > 1e-9 * expected.max(1.0) {
            return Err(fail("path length disagrees with waypoints".into()));
        }
        if mv.kind == MoveType::Type2 {
            let nodes = mv
                .path
                .iter()
                .map(|&p| array.trap_at(p, TOL))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| fail("type-2 waypoint is not a trap".into()))?;
            for w in nodes.windows(2) {
                if !array.is_linked(w[0], w[1]) {
                    return Err(fail(format!("traps {} and {} are not linked", w[0], w[1])));
                }
            }
            if let Some(&busy) = nodes[1..nodes.len() - 1]
                .iter()
                .find(|&&i| occupancy.is_filled(i))
            {
                return Err(fail(format!("type-2 path crosses filled trap {busy}")));
            }
        }
    }

    occupancy.set(mv.source, false);
    if let Some(t) = mv.target {
        occupancy.set(t, true);
    }
    Ok(())
}

/// Executes `plan` with perfect transfers and no losses, asserting every
/// plan invariant along the way.
pub fn lossless_execute(
    array: &TrapArray,
    initial: &Occupancy,
    plan: &MovePlan,
) -> Result<Occupancy> {
    if initial.len() != array.len() {
        return Err(Error::validation(
            "occupancy length does not match the array",
        ));
    }
    let mut occupancy = initial.clone();
    for (i, mv) in plan.moves.iter().enumerate() {
        apply_lossless(array, &mut occupancy, i, mv, true)?;
    }
    Ok(occupancy)
}

struct Executor<'r, R: Rng> {
    occupancy: Occupancy,
    rng: &'r mut R,
    tau_vac: f64,
    elapsed: f64,
    vacuum_losses: Vec<usize>,
}

impl<R: Rng> Executor<'_, R> {
    /// Lets `dt` pass: each trapped atom survives with `exp(-dt / tau_vac)`.
    fn idle(&mut self, dt: f64) {
        self.elapsed += dt;
        let survival = (-dt / self.tau_vac).exp();
        for i in 0..self.occupancy.len() {
            if self.occupancy.is_filled(i) && !self.rng.random_bool(survival) {
                self.occupancy.set(i, false);
                self.vacuum_losses.push(i);
            }
        }
    }
}

/// Executes `plan` stochastically.
pub fn execute_with<R: Rng>(
    array: &TrapArray,
    initial: &Occupancy,
    plan: &MovePlan,
    params: &PhysicsParams,
    rng: &mut R,
) -> Result<ExecutionResult> {
    params.validate()?;
    if initial.len() != array.len() {
        return Err(Error::validation(
            "occupancy length does not match the array",
        ));
    }
    let mut ideal = initial.clone();
    let mut ex = Executor {
        occupancy: initial.clone(),
        rng,
        tau_vac: params.tau_vac,
        elapsed: 0.0,
        vacuum_losses: Vec::new(),
    };
    let mut outcomes = Vec::with_capacity(plan.len());
    let mut move_time = 0.0;
    let mut fill_time = 0.0;
    let mut disposed = 0;

    if params.serial_overhead > 0.0 {
        ex.idle(params.serial_overhead);
    }
    for (i, mv) in plan.moves.iter().enumerate() {
        apply_lossless(array, &mut ideal, i, mv, false)?;
        let dt = move_duration(mv, params);
        move_time += dt;
        if !mv.is_disposal() {
            fill_time += dt;
        }
        ex.idle(dt);
        let outcome = if !ex.occupancy.is_filled(mv.source) {
            MoveOutcome::NoAtom
        } else {
            ex.occupancy.set(mv.source, false);
            if mv.is_disposal() {
                disposed += 1;
                MoveOutcome::Success
            } else if ex.rng.random_bool(params.p_transfer) {
                ex.occupancy.set(mv.target.expect("checked"), true);
                MoveOutcome::Success
            } else {
                MoveOutcome::TransferLoss
            }
        };
        outcomes.push(outcome);
    }
    ex.idle(params.image_time);

    let mut imaging_losses = Vec::new();
    if params.image_survival < 1.0 {
        for i in 0..ex.occupancy.len() {
            if ex.occupancy.is_filled(i) && !ex.rng.random_bool(params.image_survival) {
                ex.occupancy.set(i, false);
                imaging_losses.push(i);
            }
        }
    }

    Ok(ExecutionResult {
        final_occupancy: ex.occupancy,
        elapsed: ex.elapsed,
        move_time,
        fill_time,
        move_outcomes: outcomes,
        vacuum_losses: ex.vacuum_losses,
        imaging_losses,
        disposed,
    })
}

pub fn execute(
    array: &TrapArray,
    initial: &Occupancy,
    plan: &MovePlan,
    params: &PhysicsParams,
    seed: u64,
) -> Result<ExecutionResult> {
    execute_with(array, initial, plan, params, &mut rng_from_seed(seed))
}
