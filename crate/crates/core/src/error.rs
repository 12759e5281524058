use thiserror::Error;

use crate::train_log::TrainLog;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a documented precondition (shapes, ranges).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("replay buffer holds {available} transitions, {requested} requested")]
    NotReady { available: usize, requested: usize },

    #[error("density derivative of order {0} is not supported (k must be 0, 1 or 2)")]
    UnsupportedOrder(u32),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn dims(what: &str, expected: usize, got: usize) -> Self {
        Error::Contract(format!("{what}: expected width {expected}, got {got}"))
    }
}

/// A training run that aborted part way. The log holds every row recorded
/// before the failure.
#[derive(Debug)]
pub struct TrainFailure {
    pub log: TrainLog,
    pub error: Error,
}

impl std::fmt::Display for TrainFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} log rows)", self.error, self.log.rows.len())
    }
}

impl std::error::Error for TrainFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}
