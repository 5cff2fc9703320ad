use std::path::PathBuf;

/// Errors raised by model construction, solvers and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("channel of user {user} is identically zero")]
    DegenerateChannel { user: usize },

    #[error("channel set has no noise power; call `with_noise_power` first")]
    NoisePowerUnset,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("weight matrix of user {user} is not positive definite")]
    ObjectiveDomain { user: usize },

    #[error("weight update for user {user} is ill-conditioned (condition estimate {condition:.3e})")]
    IllConditionedWeight { user: usize, condition: f64 },

    #[error("A-MMMSE diverged at iteration {iteration} (gamma = {gamma}, omega = {omega})")]
    UnstableParameters { gamma: f64, omega: f64, iteration: usize },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: malformed trace row {row}: {reason}")]
    TraceFormat { path: PathBuf, row: usize, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
