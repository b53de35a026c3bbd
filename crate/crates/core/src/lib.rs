//! Planning and simulation of atom-by-atom assembly of defect-free arrays of
//! single atoms in optical tweezers.
//!
//! The pipeline is: stochastic loading of a reservoir ([`loading`]), greedy
//! move planning ([`planner`]), stochastic execution of the plan
//! ([`physics`]), repeated trials and statistics ([`montecarlo`]), and
//! lowering of plans to sampled control waveforms ([`waveform`]).

pub mod error;
pub mod geometry;
pub mod loading;
pub mod montecarlo;
pub mod physics;
pub mod planner;
pub mod rng;
pub mod stats;
pub mod waveform;

pub use error::{Error, Result};
pub use geometry::{
    build_lattice, build_reservoir_with_target, euclidean_distance, link_path, Embedding,
    FieldOfView, GeometryFile, LatticeKind, Occupancy, Point, TargetPattern, TrapArray,
};
pub use loading::{sample_loading, wait_for_trigger, LoadingParams, Trigger};
pub use montecarlo::{
    assembly_time_scaling, eta_vs_n, run_trials, AssemblyClock, ScalingResult, StudyConfig,
    StudyResult, TrialRecord, TrialSetup,
};
pub use physics::{execute, lossless_execute, move_duration, ExecutionResult, PhysicsParams};
pub use planner::{
    plan, plan_disposals, repair_plan, resolve_obstacles, Move, MoveMode, MovePlan, MoveType,
    PlannerOptions,
};
pub use waveform::{compile, decode, Calibration, DecodedMove, MoveTiming, WaveformSet};
