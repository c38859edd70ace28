use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("non-finite observation {value} at position {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("invalid grouping tolerance {0}")]
    InvalidTolerance(f64),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid probability vector: {0}")]
    InvalidProbVector(String),

    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),

    #[error("assignment covers {assignment} values but the sample has {sample}")]
    ValueSetMismatch { assignment: usize, sample: usize },

    #[error("empty class")]
    EmptyClass,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("unknown family id '{0}' (expected gaussian, biexp or bernoulli)")]
    UnknownFamily(String),

    #[error("bernoulli family requires observations in {{0, 1}}, found {0}")]
    NotBinary(f64),

    #[error("unexplainable point {value}: every class assigns it zero density")]
    UnexplainablePoint { value: f64 },

    #[error("enumeration of {count} assignments exceeds the limit of {limit}")]
    EnumerationTooLarge { count: f64, limit: u64 },

    #[error("no admissible assignment exists")]
    NoAdmissibleAssignment,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
