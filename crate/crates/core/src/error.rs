use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh size {0}: must be even and at least 4")]
    InvalidMesh(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("lattice mismatch: expected mesh {expected}, found {found}")]
    LatticeMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("grid index ({i}, {j}) outside {n}x{n} mesh")]
    OutOfRange { i: usize, j: usize, n: usize },

    #[error("trajectory has no state recorded at t = {0}")]
    MissingTime(f64),

    #[error("time {time} is not a whole number of solver steps (dt = {dt})")]
    OffStepTime { time: f64, dt: f64 },

    #[error("solver blow-up at step {step} (t = {time}): max |u_k| = {max_coeff:e}")]
    BlowUp {
        step: usize,
        time: f64,
        max_coeff: f64,
    },

    #[error("non-positive innovation variance {value:e} at time index {time_index}")]
    NonPositiveVariance { time_index: usize, value: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the failure came from the numerics rather than from inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::BlowUp { .. } | Error::NonPositiveVariance { .. })
    }
}
