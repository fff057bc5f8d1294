//! Error type shared across the solver.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid sizing: {0}")]
    GridSizing(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("ellipticity violated at t={t}, x={x}: a={a} < lambda={lambda}")]
    Ellipticity { t: f64, x: f64, a: f64, lambda: f64 },

    #[error("linear step solve failed at step {step}: {reason}")]
    StepSolve { step: usize, reason: String },

    #[error("conjugate gradient stalled in `{context}`: residual {residual:.3e} after {iterations} iterations")]
    CgNonConvergence {
        context: String,
        residual: f64,
        iterations: usize,
    },

    #[error("h-model: {0}")]
    HModel(String),

    #[error("positivity lost in numeric h solve at time level {level}")]
    PositivityLoss { level: usize },

    #[error("sde: {0}")]
    Sde(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
