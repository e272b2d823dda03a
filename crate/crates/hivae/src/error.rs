//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph parse error: {0}")]
    GraphParse(String),

    #[error("edge ({src} -> {dst}) references missing node {missing}")]
    DanglingEndpoint { src: usize, dst: usize, missing: usize },

    #[error("edge ({src} -> {dst}) has non-positive length {length}")]
    NonPositiveLength { src: usize, dst: usize, length: f64 },

    #[error("goal set is empty")]
    EmptyGoalSet,

    #[error("goal set entry {0} is not a graph node")]
    GoalNotANode(usize),

    #[error("duplicate goal {0} in goal set")]
    DuplicateGoal(usize),

    #[error("node ids are not dense in [0, {expected}): {detail}")]
    NonDenseNodeIds { expected: usize, detail: String },

    #[error("node id {0} out of range (|V| = {1})")]
    NodeOutOfRange(usize, usize),

    #[error("no path from {src} to {dst}")]
    NoPath { src: usize, dst: usize },

    #[error("infeasible generator spec: {0}")]
    InfeasibleSpec(String),

    #[error("episode generation failed for agent {agent}: {reason}")]
    Generation { agent: usize, reason: String },

    #[error("preference drift infeasible for agent {agent}: KL > {threshold} not reached in {attempts} attempts")]
    DriftInfeasible { agent: usize, threshold: f64, attempts: usize },

    #[error("false-goal synthesis failed: no origin passes within radius {radius} of node {false_goal}")]
    FalseGoalSynthesis { false_goal: usize, radius: f64 },

    #[error("shape mismatch: {0:?} vs {1:?} in {2}")]
    ShapeMismatch(Vec<usize>, Vec<usize>, String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("{0}")]
    InvalidInput(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },

    #[error("degenerate sample: all paired differences are zero")]
    DegenerateSample,

    #[error("unknown model '{0}'")]
    UnknownModel(String),

    #[error("missing checkpoint for model '{0}' at {1}")]
    MissingCheckpoint(String, String),

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// CLI exit code class for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownModel(_) | Error::InfeasibleSpec(_) => 2,
            Error::Divergence { .. } => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
