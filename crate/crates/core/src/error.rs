use thiserror::Error;

/// Errors produced by the planning toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time {t} outside trajectory domain [0, {duration}]")]
    OutOfDomain { t: f64, duration: f64 },

    #[error("sample times of the trajectories do not match")]
    MismatchedSamples,

    #[error("degenerate trajectory: zero displacement over the unit interval")]
    DegenerateTrajectory,

    #[error("projection system is rank deficient: {0}")]
    RankDeficient(String),

    #[error("no collision-free trajectory among {samples} samples")]
    Infeasible { samples: usize },

    #[error("global planner found no path from start to goal")]
    Blocked,

    #[error("fit diverged at step {step}")]
    Diverged { step: usize, trace: Vec<f64> },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::OutOfDomain { .. } => "out_of_domain",
            Error::MismatchedSamples => "mismatched_samples",
            Error::DegenerateTrajectory => "degenerate_trajectory",
            Error::RankDeficient(_) => "rank_deficient",
            Error::Infeasible { .. } => "infeasible",
            Error::Blocked => "blocked",
            Error::Diverged { .. } => "diverged",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
