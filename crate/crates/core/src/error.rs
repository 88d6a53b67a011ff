use std::time::Duration;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad scenario, context, target or configuration.
    Validation,
    /// The model or its transport misbehaved.
    Model,
    /// An internal invariant was broken.
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("value {value} for feature '{feature}' is outside [{lower}, {upper}]")]
    OutOfRange {
        feature: String,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("unknown level '{level}' for categorical feature '{feature}'")]
    UnknownLevel { feature: String, level: String },

    #[error("invalid feature '{name}': {reason}")]
    InvalidFeature { name: String, reason: String },

    #[error("duplicate feature name '{0}'")]
    DuplicateFeature(String),

    #[error("feature space must declare at least one feature")]
    EmptySpace,

    #[error("unknown feature '{0}'")]
    UnknownFeature(String),

    #[error("invalid output '{name}': {reason}")]
    InvalidOutput { name: String, reason: String },

    #[error("unknown output '{0}'")]
    UnknownOutput(String),

    #[error("unknown concept '{0}'")]
    UnknownConcept(String),

    #[error("concept cycle: {}", .0.join(" -> "))]
    ConceptCycle(Vec<String>),

    #[error("invalid concept '{name}': {reason}")]
    InvalidConcept { name: String, reason: String },

    #[error("unknown target '{0}' (not a feature or concept)")]
    UnknownTarget(String),

    #[error("invalid estimator configuration: {0}")]
    InvalidConfig(String),

    #[error("grid would need {count} probes, above the cap of {cap}; use the montecarlo strategy")]
    ProbeCap { count: u128, cap: u64 },

    #[error("invalid label scale: {0}")]
    InvalidScale(String),

    #[error("{0}")]
    InvalidArgument(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("model specification error: {0}")]
    ModelSpec(String),

    #[error("model expects {model} inputs but the feature space has {space}")]
    ArityMismatch { model: usize, space: usize },

    #[error("input vector {position} has length {actual}, model expects {expected}")]
    Dimension {
        position: usize,
        expected: usize,
        actual: usize,
    },

    #[error("model returned a non-finite value at batch position {position}, output {output}")]
    NonFinite { position: usize, output: usize },

    #[error("model returned {actual} {what}, expected {expected}")]
    OutputShape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("adapter transport error: {0}")]
    Transport(String),

    #[error("adapter did not answer within {0:?}")]
    Timeout(Duration),

    #[error("malformed adapter response: {0}")]
    Protocol(String),

    #[error("adapter error: {0}")]
    Adapter(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::ArityMismatch { .. }
            | Error::Dimension { .. }
            | Error::NonFinite { .. }
            | Error::OutputShape { .. }
            | Error::Transport(_)
            | Error::Timeout(_)
            | Error::Protocol(_)
            | Error::Adapter(_) => ErrorClass::Model,
            Error::Invariant(_) => ErrorClass::Internal,
            _ => ErrorClass::Validation,
        }
    }
}
