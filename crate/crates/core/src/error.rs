use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("depth cap {cap} exceeded before reaching target diameter {target} (level {level}, {points} points)")]
    CapExceeded {
        cap: usize,
        target: f64,
        level: usize,
        points: usize,
    },

    #[error("every one of {repetitions} repetitions exceeded the depth cap {cap} (level {level}, {points} points, target {target})")]
    AllRepetitionsFailed {
        repetitions: usize,
        cap: usize,
        level: usize,
        points: usize,
        target: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("partitioner made no progress at round {round} (average diameter {avg_diam})")]
    NoProgress { round: usize, avg_diam: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
