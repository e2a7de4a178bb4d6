use std::io;

use thiserror::Error;

use crate::tilt::DiversityReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("slope out of range: |alpha| = {alpha}, |beta| = {beta} (both must be < 1)")]
    SlopeOutOfRange { alpha: f64, beta: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("lattice mismatch between operands")]
    LatticeMismatch,

    #[error("parallel directions have no finite common set")]
    ParallelDirections,

    #[error("vandermonde nodes too close: min gap {min_gap:e} <= tolerance {tol:e}")]
    NearSingular { min_gap: f64, tol: f64 },

    #[error("need at least {needed} same-family directions, found {found}")]
    InsufficientDirections { needed: usize, found: usize },

    #[error("diversity condition fails at frequency {:?}", .0.worst_pair.as_ref().map(|w| w.frequency))]
    DiversityFailure(Box<DiversityReport>),

    #[error("tilt scheme is not epsilon-connected (epsilon = {epsilon})")]
    NotConnected { epsilon: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
