use thiserror::Error;

/// Errors produced anywhere in the verification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("linear program solver failure: {0}")]
    Solver(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical overflow: {0}")]
    Overflow(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error(transparent)]
    Parse(#[from] crate::stl::ParseError),

    #[error("unsupported formula structure: {0}")]
    Unsupported(String),

    #[error("unsafe-set list exceeded the cap of {0} polytopes")]
    PolytopeCap(usize),

    #[error("branch-and-bound exceeded the node cap of {0}")]
    NodeCap(usize),

    #[error("truncation order search exceeded the cap of {0}")]
    OrderCap(usize),

    #[error("trace error: {0}")]
    Trace(String),

    #[error("problem file error at {path}: {message}")]
    Problem { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
