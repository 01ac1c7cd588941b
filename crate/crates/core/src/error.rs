use std::fmt;

use thiserror::Error;

/// Structural hypotheses a coefficient profile must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// (i): β nondecreasing, C¹, β(0) = 0.
    MonotoneBeta,
    /// (ii): D bounded with bounded negative divergence.
    BoundedDrift,
    /// (iii): b C¹, bounded, nonnegative; constant unless β is strictly increasing.
    Mobility,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hypothesis::MonotoneBeta => {
                f.write_str("hypothesis (i): beta must be a nondecreasing C^1 function with beta(0) = 0")
            }
            Hypothesis::BoundedDrift => f.write_str(
                "hypothesis (ii): D must be bounded with bounded negative part of div D",
            ),
            Hypothesis::Mobility => f.write_str(
                "hypothesis (iii): b must be C^1, bounded, nonnegative, and b = const. if beta is not strictly increasing",
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{hypothesis}: {reason}")]
    Hypothesis { hypothesis: Hypothesis, reason: String },

    #[error("scalar resolvent root did not converge for r = {r}")]
    ScalarRoot { r: f64 },

    #[error("point {point:?} lies outside the box [-{half_width}, {half_width}]^d")]
    OutsideBox { point: Vec<f64>, half_width: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error(
        "resolvent solve did not converge after {iterations} iterations; last relative residuals {:?}",
        &history[history.len().saturating_sub(5)..]
    )]
    NonConvergence { iterations: usize, history: Vec<f64> },

    #[error("time step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient samples: need {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("unknown suite `{0}`")]
    UnknownSuite(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
