//! Crate-wide error type and result alias.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("enumeration would produce {count} sentences, over the cap of {cap}")]
    SpaceTooLarge { count: u128, cap: usize },

    #[error("alphabet has {found} symbols, over the supported maximum of {max}")]
    AlphabetTooLarge { found: usize, max: usize },

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("sentence not in space: {0}")]
    NotInSpace(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    #[error("requested mutual information {requested} exceeds achievable maximum {achievable}")]
    InfeasibleMi { requested: f64, achievable: f64 },

    #[error("support size {found} exceeds the coupling-search cap of {cap}")]
    SupportTooLarge { found: usize, cap: usize },

    #[error("training diverged at step {step}: {what}")]
    Diverged { step: usize, what: String },

    #[error("no runs found under {0}")]
    NoRuns(String),

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
