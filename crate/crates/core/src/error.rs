//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, got {got} ({context})")]
    ShapeMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("trajectory rejected: {0}")]
    TrajectoryRejected(String),

    #[error("distribution collapse: every fitted trajectory was labeled noise")]
    DistributionCollapse,

    #[error("infeasible distribution: no accepted throw after {attempts} samples")]
    InfeasibleDistribution { attempts: usize },

    #[error("degenerate reward landscape: sigma_r = 0, update skipped")]
    DegenerateRewards,

    #[error("episode is not active (reset required)")]
    EpisodeInactive,

    #[error("infeasible throw: {0}")]
    InfeasibleThrow(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("missing prerequisite: {0}")]
    MissingPrerequisite(String),

    #[error("checkpoint format error: {0}")]
    CheckpointFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("TOML parse error: {0}")]
    TomlParse(#[from] toml::de::Error),

    #[error("TOML serialize error: {0}")]
    TomlSerialize(#[from] toml::ser::Error),
}
