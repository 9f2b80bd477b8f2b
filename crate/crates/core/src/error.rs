//! Error type shared by the library modules.

use alloc::string::String;
use core::fmt;

/// Errors produced by simulation, encoding, and model evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// A model or network definition violates an invariant.
    InvalidModel(String),
    /// A state vector contains a non-finite entry.
    NumericalBlowUp { bus: usize },
    /// Shapes of two tensors (or a tensor and an operator) disagree.
    ShapeMismatch(String),
    /// A fault-stage index outside the scenario's stage range.
    UnknownStage { stage: usize, n_stages: usize },
    /// Equilibrium search did not converge.
    NoEquilibrium,
    /// A trajectory does not cover the requested time window.
    InsufficientHorizon(String),
    /// Inverse transform of a non-Hermitian spectrum.
    NonRealInverse { max_imag: f64 },
    /// Scenario distribution cannot be sampled.
    EmptyDistribution(String),
    /// A target with zero l1 norm entered the percentage-error loss.
    DegenerateTarget { sample: usize },
    /// Training aborted on a non-finite loss.
    NanLoss { episode: usize },
    /// Metric asked of an empty input set.
    EmptyInput(String),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::InvalidModel(msg) => write!(f, "invalid model: {msg}"),
            CoreError::NumericalBlowUp { bus } => {
                write!(f, "numerical blow-up at bus {bus}")
            }
            CoreError::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            CoreError::UnknownStage { stage, n_stages } => {
                write!(f, "unknown stage {stage} (scenario has {n_stages} stages)")
            }
            CoreError::NoEquilibrium => write!(f, "no equilibrium found"),
            CoreError::InsufficientHorizon(msg) => {
                write!(f, "insufficient horizon: {msg}")
            }
            CoreError::NonRealInverse { max_imag } => {
                write!(f, "non-real inverse: max |imag| = {max_imag:e}")
            }
            CoreError::EmptyDistribution(msg) => {
                write!(f, "empty distribution: {msg}")
            }
            CoreError::DegenerateTarget { sample } => {
                write!(f, "degenerate target in sample {sample}")
            }
            CoreError::NanLoss { episode } => {
                write!(f, "non-finite loss at episode {episode}")
            }
            CoreError::EmptyInput(msg) => write!(f, "empty input: {msg}"),
        }
    }
}

impl core::error::Error for CoreError {}

pub type Result<T> = core::result::Result<T, CoreError>;
