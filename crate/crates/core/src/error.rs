use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("node {node} has degree {degree}; at most 3 is supported")]
    DegreeTooHigh { node: usize, degree: usize },

    #[error("rotation system is not planar: V - E + F = {euler} on a component (expected 2)")]
    NonPlanarEmbedding { euler: i64 },

    #[error("malformed factor table at node {node}: {reason}")]
    MalformedTable { node: usize, reason: String },

    #[error("edge {edge} is dangling: {reason}")]
    DanglingEdge { edge: usize, reason: String },

    #[error("invalid graph structure: {0}")]
    InvalidStructure(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("partition function is zero")]
    ZeroPartition,

    #[error("belief normalizer vanished at {0}")]
    NumericalUnderflow(String),

    #[error("belief is positive where the factor vanishes at node {node}")]
    DomainError { node: usize },

    #[error("triplet set has odd cardinality {0}")]
    OddPsi(usize),

    #[error("node {0} is not a triplet of the 2-core")]
    PsiNotTriplet(usize),

    #[error("rotation system is inconsistent: {0}")]
    InconsistentRotation(String),

    #[error("matrix dimension {0} is odd")]
    OddDimension(usize),

    #[error("matrix is not skew-symmetric at ({0}, {1})")]
    NotSkew(usize, usize),

    #[error("error metric undefined for log Z = 0")]
    ZeroDenominator,

    #[error("io: {0}")]
    Io(String),

    #[error("format: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}
