use thiserror::Error;

/// Errors produced anywhere in the identification / uncertainty pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("integration diverged at step {step}: {msg}")]
    IntegrationDiverged { step: usize, msg: String },

    #[error("rollout diverged at step {step}")]
    RolloutDiverged { step: usize },

    #[error("solver diverged at iteration {iteration}{}", batch.map(|b| format!(" (batch {b})")).unwrap_or_default())]
    SolverDiverged {
        iteration: usize,
        batch: Option<usize>,
        trace: Vec<crate::vamp::IterationRecord>,
    },

    #[error("insufficient history: index {index} needs at least {needed} prior samples")]
    InsufficientHistory { index: usize, needed: usize },

    #[error("requested {requested} modes but achievable rank is {rank}")]
    RankTooLow { requested: usize, rank: usize },

    #[error("lift dimension {dim} exceeds cap {cap}")]
    LiftTooLarge { dim: usize, cap: usize },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::IntegrationDiverged { .. }
            | Error::RolloutDiverged { .. }
            | Error::SolverDiverged { .. }
            | Error::Linalg(_) => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
