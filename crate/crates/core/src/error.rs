use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced by the assembler library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("geometry constraint violated: {0}")]
    Geometry(String),

    #[error("trap index {index} out of range for array of {len} traps")]
    InvalidIndex { index: usize, len: usize },

    #[error("no link path from trap {source_trap} to trap {target_trap}")]
    NoPath {
        source_trap: usize,
        target_trap: usize,
    },

    #[error("insufficient atoms: {available} available, {required} required")]
    InsufficientAtoms { available: usize, required: usize },

    #[error("type-1 moves need spacing >= {min} um, array spacing is {actual} um")]
    Spacing { min: f64, actual: f64 },

    #[error("point ({x:.3}, {y:.3}) um lies outside the field of view")]
    FieldOfView { x: f64, y: f64 },

    #[error("point ({x:.3}, {y:.3}) um is outside the calibrated range")]
    CalibrationRange { x: f64, y: f64 },

    #[error("trigger not reached after {cycles} loading cycles")]
    TriggerTimeout { cycles: u64 },

    #[error("plan integrity violated at move {index}: {reason}")]
    PlanIntegrity { index: usize, reason: String },

    #[error("waveform decode failed: {0}")]
    Decode(String),

    #[error("power-law fit needs at least 3 points, got {0}")]
    Fit(usize),

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for errors caused by bad user input rather than by a failure
    /// while running. The CLI maps these to distinct exit codes.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Validation(_)
            | Error::Geometry(_)
            | Error::InvalidIndex { .. }
            | Error::Spacing { .. }
            | Error::FieldOfView { .. }
            | Error::CalibrationRange { .. }
            | Error::Json(_)
            | Error::InsufficientAtoms { .. } => true,
            Error::Trial { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
