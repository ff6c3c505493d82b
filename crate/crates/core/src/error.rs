use std::path::PathBuf;

use thiserror::Error;

use crate::stepper::StepStats;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("dimension mismatch in {op}: {detail}")]
pub struct DimensionError {
    pub op: &'static str,
    pub detail: String,
}

impl DimensionError {
    pub fn new(op: &'static str, detail: impl Into<String>) -> Self {
        Self {
            op,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoefficientError {
    #[error("Legendre evaluation point {0} lies outside [0, 1]")]
    OutsideUnitInterval(f64),
    #[error("quadrature needs at least one node")]
    EmptyRule,
    #[error("k = {k} exceeds the supported maximum {max}")]
    TooManyNodes { k: usize, max: usize },
    #[error("s = {0} outside supported range 1..=10")]
    DegreeOutOfRange(usize),
    #[error("HBVM({k},{s}) requires k >= s")]
    TooFewNodes { k: usize, s: usize },
}

/// Why a stage solve did not produce a usable γ.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FailureKind {
    #[error("no convergence within {0} iterations")]
    MaxIterations(usize),
    #[error("iteration diverged")]
    Diverged,
    #[error("non-finite gradient at stage {stage}")]
    NonFinite { stage: usize },
    #[error("singular iteration matrix (step size too large?)")]
    Singular,
    #[error("step size {0} must be positive and finite")]
    InvalidStepSize(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} after {} iterations", stats.iterations)]
pub struct StepFailure {
    pub kind: FailureKind,
    pub stats: StepStats,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid run specification: {0}")]
    InvalidSpec(String),
    #[error("unknown problem '{0}' (expected quintic, pendulum or harmonic)")]
    UnknownProblem(String),
    #[error(transparent)]
    Coefficients(#[from] CoefficientError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
