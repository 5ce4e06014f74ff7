use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
///
/// Validation errors describe bad inputs (malformed files, violated
/// preconditions); the rest are runtime failures of an otherwise valid
/// computation. The CLI maps the two groups onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("adjacency is not {degree}-regular: {axis} {index} sums to {sum}")]
    NotRegular {
        degree: usize,
        axis: &'static str,
        index: usize,
        sum: usize,
    },

    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    #[error("negative variance {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("operation requires a raw (W/sqrt(d)) ensemble, found {found}")]
    WrongNormalization { found: &'static str },

    #[error("sigma is numerically singular (min eigenvalue {min_eig:e} <= floor {floor:e})")]
    SingularSigma { min_eig: f64, floor: f64 },

    #[error("{what} too large for dense evaluation: n = {n} exceeds {max}")]
    TooLarge { what: &'static str, n: usize, max: usize },

    #[error("not converged after {iterations} iterations (residual {residual:e}, tolerance {tol:e})")]
    ConvergenceFailure { iterations: usize, residual: f64, tol: f64 },

    #[error("dense factorization failed: {0}")]
    Factorization(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },
}

impl Error {
    /// True for errors caused by the caller's input rather than by the
    /// computation itself.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::InvalidArgument(_)
                | Error::NotRegular { .. }
                | Error::ParseError { .. }
                | Error::NegativeEntry { .. }
                | Error::WrongNormalization { .. }
                | Error::TooLarge { .. }
                | Error::InvalidDensityMatrix(_)
                | Error::InsufficientData(_)
                | Error::InvalidConfig(_)
                | Error::Format { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
