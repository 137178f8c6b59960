use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected:?}, got {actual:?}")]
    Shape {
        context: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("parameter layouts differ: {0}")]
    LayoutMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("numeric overflow: non-finite activation in layer `{0}`")]
    NumericOverflow(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient samples: {what} requires {required}, only {available} available")]
    InsufficientSamples {
        what: String,
        required: usize,
        available: usize,
    },

    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("training diverged (non-finite loss) after last finite epoch {last_finite_epoch}")]
    TrainingDiverged { last_finite_epoch: usize },

    #[error("optimizer did not converge: final gradient norm {grad_norm:e}")]
    NotConverged { grad_norm: f64 },

    #[error("oracle cap exceeded: {params} parameters > cap {cap}")]
    OracleCap { params: usize, cap: usize },

    #[error("matrix is not positive definite; increase damping (current {damping})")]
    NotPositiveDefinite { damping: f64 },

    #[error("inverse-HVP recursion diverged at step {step}")]
    LissaDiverged { step: usize },

    #[error("scoring failed on {failed} of {total} samples (ids {ids:?})")]
    ScoringBudget {
        failed: usize,
        total: usize,
        ids: Vec<usize>,
    },

    #[error("checkpoint mismatch: attack fitted on {expected}, got {actual}")]
    CheckpointMismatch { expected: String, actual: String },

    #[error("{0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
