use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("non-finite entry in {what}")]
    NonFinite { what: &'static str },

    /// `index` is the zero-based position of the failing pivot.
    #[error("matrix is not positive definite: pivot {} is not positive", .index + 1)]
    NotPositiveDefinite { index: usize },

    #[error("degenerate Householder vector (B-norm {norm:e})")]
    DegenerateReflector { norm: f64 },

    #[error(
        "could not build an initial B-orthonormal basis: leading submatrix is not positive \
         definite at pivot {}; supply a precomputed basis instead",
        .index + 1
    )]
    InitialBasisFailure { index: usize },

    #[error("input matrix has zero norm")]
    ZeroInput,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub(crate) fn shape_mismatch(
    op: &'static str,
    expected: (usize, usize),
    found: (usize, usize),
) -> Error {
    Error::DimensionMismatch {
        op,
        expected: format!("{}x{}", expected.0, expected.1),
        found: format!("{}x{}", found.0, found.1),
    }
}
