//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("context length {len} exceeds context window {window}")]
    ContextTooLong { len: usize, window: usize },

    #[error("router override expert index {index} out of range (num_experts = {num_experts})")]
    ExpertOutOfRange { index: usize, num_experts: usize },

    #[error("router override covers {given} MoE invocations, {needed} needed")]
    OverrideTooShort { given: usize, needed: usize },

    #[error("router override selects {given} experts, top_k = {top_k}")]
    OverrideWrongWidth { given: usize, top_k: usize },

    #[error("rollout carries no router trace for token {position}")]
    MissingTrace { position: usize },

    #[error("non-finite logits")]
    NonFiniteLogits,

    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),

    #[error("parameter vector has length {got}, layout requires {expected}")]
    ParamLengthMismatch { got: usize, expected: usize },

    #[error("parameter vector contains non-finite entries")]
    NonFiniteParams,

    #[error("tool call list of size {got} exceeds the size bound {bound}")]
    ToolListTooLarge { got: usize, bound: usize },

    #[error("malformed constraint payload: {0}")]
    MalformedConstraint(String),

    #[error("group advantages requested for a zero-variance group")]
    ZeroVarianceGroup,

    #[error("zero-variance reshaping requested for a group with reward variance {variance}")]
    NotZeroVariance { variance: f64 },

    #[error("entropy partition does not match sequence: {0}")]
    PartitionMismatch(String),

    #[error("gradient contains non-finite entries")]
    NonFiniteGradient,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("job {job} assigned to {count} workers (expected exactly one)")]
    BadAssignment { job: usize, count: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
