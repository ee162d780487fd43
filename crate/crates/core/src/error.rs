use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("time {t} outside {range}")]
    TimeOutOfRange { t: f64, range: &'static str },

    #[error("operation requires a {expected} schedule")]
    WrongKind { expected: &'static str },

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("perturbation variance is zero at t = {t}; the conditional score is singular")]
    Singular { t: f64 },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("checkpoint {path}: {msg}")]
    Checkpoint { path: PathBuf, msg: String },

    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    Diverged { iteration: usize, loss: f64 },

    #[error("sampler produced a non-finite state at step {step} ({phase})")]
    SamplerNonFinite { phase: &'static str, step: usize },

    #[error("graph with {v} nodes exceeds the orbit-counting limit of {limit}")]
    TooLarge { v: usize, limit: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
