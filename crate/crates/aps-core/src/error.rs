//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("infeasible basal target: EGP/G_T = {ratio} must exceed GEZI = {gezi}")]
    InfeasibleBasal { ratio: f64, gezi: f64 },

    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("unknown signal `{0}`")]
    UnknownSignal(String),

    #[error("unresolved slot `{0}`")]
    UnresolvedSlot(String),

    #[error("robustness is undefined for equality atoms; use boolean evaluation")]
    EqualityRobustness,

    #[error("optimizer did not converge after {iters} iterations (best f = {best_f:.6e})")]
    NoConvergence {
        iters: usize,
        best_f: f64,
        best_x: Vec<f64>,
        history: Vec<crate::learn::IterRecord>,
    },

    #[error("empty training set for slot `{0}`")]
    EmptyTrainingSet(String),

    #[error("scenario `{id}`: {msg}")]
    Scenario { id: String, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
