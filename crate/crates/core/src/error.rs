//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the statistical routines.
///
/// Numerical evaluation itself is written to stay finite on the documented
/// domains; errors report contract violations (bad arguments, invalid
/// hyperparameters, ill-posed configurations) rather than overflow.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A prior or density hyperparameter violates its constraint.
    #[error("hyperparameter error: {0}")]
    Hyperparameter(String),

    /// The requested quantity is undefined for the given tail class
    /// (e.g. asking for a power-law tail constant of the normal density).
    #[error("tail class error: {0}")]
    TailClass(String),

    /// Pieces of a model do not fit together (mismatched lengths,
    /// out-of-range indices, missing tails, unsupported prior/model pairs).
    #[error("configuration error: {0}")]
    Configuration(String),

    /// A vector or matrix has an incompatible dimension.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A computation produced a non-finite intermediate where the contract
    /// requires finiteness.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The sampler could not be initialized (non-finite target or gradient
    /// at the starting point, or an empty chain request).
    #[error("initialization error: {0}")]
    Initialization(String),

    /// Adaptive quadrature exhausted its subdivision budget before reaching
    /// the requested relative tolerance.
    #[error("quadrature tolerance not met: achieved {achieved:.3e}, requested {requested:.3e}")]
    QuadratureTolerance { achieved: f64, requested: f64 },

    /// File I/O failure, with the offending path.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed tabular data (bad header, ragged rows, unparseable field).
    #[error("csv error on {path}: {message}")]
    Csv { path: String, message: String },
}

impl Error {
    /// Attach a path to an I/O error.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Build a CSV error with path context.
    pub fn csv(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Csv {
            path: path.into(),
            message: message.into(),
        }
    }
}
