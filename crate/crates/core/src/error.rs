//! Error types for the engine layers.

use std::io;

use thiserror::Error;

/// Domain errors raised by the quality model: scores, transitions, trails,
/// and engine configuration.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum TrailError {
    #[error("quality score {score} out of range [1, {max_quality}]")]
    ScoreOutOfRange { score: u32, max_quality: u32 },

    #[error("timestamp {new} does not increase over {last}; modification rejected")]
    NonMonotonicTimestamp { last: u64, new: u64 },

    #[error("transition index {index} out of range for trail of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("trim count must be at least 1 (trails are non-empty)")]
    ZeroTrim,

    #[error("merge requires at least one input")]
    EmptyMergeInput,

    #[error("statistics combination requires at least one input")]
    EmptyStats,

    #[error("invalid statistics: {0}")]
    InvalidStats(String),

    #[error("invalid engine configuration: {0}")]
    InvalidConfig(String),
}

/// Error produced when trail text does not conform to the wire format.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("trail parse error at byte {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(position: usize, message: impl Into<String>) -> Self {
        ParseError {
            position,
            message: message.into(),
        }
    }
}

/// Errors raised while validating or executing a logical plan.
#[derive(Debug, Error)]
pub enum PlanError {
    #[error("unknown table '{0}'")]
    UnknownTable(String),

    #[error("unknown column '{0}'")]
    UnknownColumn(String),

    #[error("ambiguous column '{0}' appears on both sides of the join")]
    AmbiguousColumn(String),

    #[error("type mismatch: {0}")]
    TypeMismatch(String),

    #[error("schemas are not union-compatible: {0}")]
    SchemaMismatch(String),

    #[error("plan error at {path}: {message}")]
    PlanJson { path: String, message: String },

    #[error(transparent)]
    Aggregate(#[from] AggregateError),

    #[error(transparent)]
    Store(#[from] StoreError),

    #[error(transparent)]
    Trail(#[from] TrailError),
}

impl PlanError {
    pub fn json(path: impl Into<String>, message: impl Into<String>) -> Self {
        PlanError::PlanJson {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for violations of internal invariants the engine itself
    /// guarantees, as opposed to bad input data or plans.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            PlanError::Aggregate(AggregateError::Protocol(_))
                | PlanError::Aggregate(AggregateError::InternalInvariant(_))
        )
    }
}

/// Errors raised by the grouping/aggregation machinery.
#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("aggregation protocol violation: {0}")]
    Protocol(String),

    #[error("spill storage failure: {0}")]
    Storage(#[from] io::Error),

    #[error("internal invariant violated: {0}")]
    InternalInvariant(String),
}

/// Errors raised by the catalog, ingestion, and persistence layer.
#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("line {line}: {source}")]
    TrailParse {
        line: usize,
        #[source]
        source: ParseError,
    },

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("unknown table '{0}'")]
    UnknownTable(String),

    #[error("table '{0}' already exists")]
    DuplicateTable(String),

    #[error("duplicate tuple id '{id}' in table '{table}'")]
    DuplicateTupleId { table: String, id: String },

    #[error("table '{table}' has no trail entry for tuple id '{id}'")]
    DanglingTrail { table: String, id: String },

    #[error("unknown column '{0}'")]
    UnknownColumn(String),

    #[error(transparent)]
    Trail(#[from] TrailError),
}
