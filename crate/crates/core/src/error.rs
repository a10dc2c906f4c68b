use thiserror::Error;

/// Errors produced by model construction, assembly, factorization and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("zero conductance at cell ({row}, {col})")]
    ZeroConductance { row: usize, col: usize },

    #[error("triplet ({row}, {col}) out of range for a {dim}x{dim} matrix")]
    OutOfRange { row: usize, col: usize, dim: usize },

    #[error("matrix is numerically singular (no acceptable pivot at elimination step {pivot})")]
    Singular { pivot: usize },

    #[error("degenerate solution: {0}")]
    Degenerate(String),

    #[error("matrix generation failed: {0}")]
    Generation(String),

    #[error("unknown technology-node preset `{0}`")]
    UnknownPreset(String),

    #[error("bias search failed: {0}")]
    Search(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            found,
        })
    }
}
