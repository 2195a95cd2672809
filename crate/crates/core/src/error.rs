use num_complex::Complex64;
use thiserror::Error;

use crate::hypotheses::Violation;

#[derive(Debug, Error)]
pub enum FracError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Gamma function has a pole at {0}")]
    GammaPole(f64),

    #[error("coefficient check failed at node {node}: {detail}")]
    Coefficient { node: usize, detail: String },

    #[error("resolvent system is singular at p = {p}: condition estimate {cond:e}")]
    SingularResolvent { p: Complex64, cond: f64 },

    #[error("eigensolver failed to converge after {iterations} sweeps")]
    EigenConvergence { iterations: usize },

    #[error("requested {requested} modes but the operator has only {available}")]
    TooManyModes { requested: usize, available: usize },

    #[error("operation requires a self-adjoint operator (b = 0)")]
    NotSelfAdjoint,

    #[error("hypothesis check failed: {}", format_violations(.0))]
    Hypothesis(Vec<Violation>),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("scenario parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl FracError {
    /// True for errors that come from an ill-posed input rather than a
    /// numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            FracError::InvalidParameter(_)
                | FracError::GammaPole(_)
                | FracError::Coefficient { .. }
                | FracError::TooManyModes { .. }
                | FracError::NotSelfAdjoint
                | FracError::Hypothesis(_)
                | FracError::Shape(_)
                | FracError::Parse { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, FracError>;

pub(crate) fn invalid(msg: impl Into<String>) -> FracError {
    FracError::InvalidParameter(msg.into())
}
