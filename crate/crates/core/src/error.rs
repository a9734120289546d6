use thiserror::Error;

/// Errors raised by instance construction, the search structures and the maximizers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("index {index} out of range for {len} elements")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("index {0} is already in the set")]
    AlreadySelected(usize),

    #[error("duplicate index {0} in chain")]
    DuplicateIndex(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parameter `{name}` = {value} outside {range}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("vector {index:?} has norm {norm} above the bound {bound}")]
    NormBound {
        index: Option<usize>,
        norm: f64,
        bound: f64,
    },

    #[error("query norm {norm} exceeds 1")]
    QueryNorm { norm: f64 },

    #[error("query matrix Frobenius norm {norm} exceeds 1")]
    FrobeniusNorm { norm: f64 },

    #[error("vector {index:?} is not unit length (norm {norm})")]
    NotUnit { index: Option<usize>, norm: f64 },

    #[error("candidate set is empty")]
    EmptyCandidates,

    #[error("index {0} is not a live candidate")]
    NotLive(usize),

    #[error("cardinality {k} exceeds the ground set size {n}")]
    CardinalityTooLarge { k: usize, n: usize },

    #[error("exhaustive search is limited to n <= {max}, got n = {n}")]
    TooLarge { n: usize, max: usize },

    #[error("sketch storage needs {required} bytes, above the limit of {limit}")]
    Capacity { required: u128, limit: u128 },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("{0}")]
    Unsupported(&'static str),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
