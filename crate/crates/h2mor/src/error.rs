use num_complex::Complex64;

/// Errors reported by every fallible routine in the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("matrix is not Hermitian positive definite")]
    NotPositiveDefinite,
    #[error("matrix is not Hurwitz stable")]
    Unstable,
    #[error("singular matrix")]
    Singular,
    #[error("matrix pencil is singular")]
    SingularPencil,
    #[error("{0} did not converge")]
    NoConvergence(&'static str),
    #[error("evaluation point {0} coincides with a pole")]
    PoleProximity(Complex64),
    #[error("sample points {0} and {1} are not distinct")]
    DuplicatePoints(usize, usize),
    #[error("sample point {0} is not in the open right half-plane")]
    NotInRightHalfPlane(Complex64),
    #[error("no tabulated value at {0}")]
    NotTabulated(Complex64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
