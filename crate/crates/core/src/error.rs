use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("form is not homogeneous of a single bidegree")]
    NotHomogeneous,
    #[error("inadmissible bidegree ({base}, {fiber}) for n = {n}")]
    InadmissibleBidegree { n: usize, base: usize, fiber: usize },
    #[error("form is not primitive")]
    NotPrimitive,
    #[error("matrix is singular")]
    Singular,
    #[error("index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("degree k = {k} out of range for n = {n}")]
    DegreeOutOfRange { n: usize, k: usize },
    #[error("polynomial is not in the span of the minor basis")]
    NotInSpan,
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("mixed representation classes in one call")]
    MixedRepresentations,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("exponential overflow: |<x, y>| reaches {0:.1} on the support")]
    Overflow(f64),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
