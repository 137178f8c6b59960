use thiserror::Error;

/// Failures surfaced to the operator, each with its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("scorer failure budget exceeded: {0}")]
    ScorerBudget(String),
    #[error("attack fitting failed: {0}")]
    Fit(String),
    #[error("oracle checks failed: {0}")]
    Oracle(String),
    #[error(transparent)]
    Core(#[from] sif_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::ScorerBudget(_) => 4,
            CliError::Fit(_) => 5,
            CliError::Oracle(_) => 6,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}
