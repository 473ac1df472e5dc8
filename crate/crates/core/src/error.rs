//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by monitors, graph evaluation, verification, training,
/// and the certification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unbound input `{0}`")]
    UnboundInput(String),

    #[error("signal too short: need index up to {needed} from t={t}, signal has {len} steps")]
    Horizon { t: usize, needed: usize, len: usize },

    #[error("invalid formula: {0}")]
    InvalidFormula(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("node kind `{kind}` not supported by {op}")]
    UnsupportedNode { op: &'static str, kind: String },

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("B is empty: property unsatisfied or search failed")]
    EmptyCertifiedSet,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("planner: {0}")]
    Planner(String),

    #[error("dataset generation budget exhausted after {attempts} attempts")]
    GenerationBudget { attempts: usize },

    #[error("insufficient samples: need {need}, have {have}")]
    InsufficientSamples { need: usize, have: usize },

    #[error("unknown environment `{0}`")]
    UnknownEnvironment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
