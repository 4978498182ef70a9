use thiserror::Error;

/// Error type shared by the solver and pricing layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: field has {cells} cells but face field has {faces} faces (expected {})", cells - 1)]
    ShapeMismatch { cells: usize, faces: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("stability violated{}: max |C| = {max_courant:.6} exceeds {bound}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    Unstable {
        step: Option<usize>,
        max_courant: f64,
        bound: f64,
    },

    #[error("non-finite values at step {step}")]
    NonFinite { step: usize },

    #[error("spot price {s0} outside grid domain [{lo}, {hi}]")]
    SpotOutsideDomain { s0: f64, lo: f64, hi: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("convergence fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
