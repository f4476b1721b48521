use thiserror::Error;

use crate::trace::SolverTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("numerical consistency violated: {0}")]
    Numerical(String),

    /// The iterate became non-finite or the objective blew past the guard.
    /// Carries everything recorded up to the failure.
    #[error("solver diverged at outer {outer}, inner {inner}")]
    Diverged {
        outer: usize,
        inner: usize,
        trace: Box<SolverTrace>,
    },

    #[error("invalid file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_dim(op: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { op, expected, got });
    }
    Ok(())
}

macro_rules! contract {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::Contract(format!($($arg)+)));
        }
    };
}
pub(crate) use contract;
