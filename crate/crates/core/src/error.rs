use thiserror::Error;

use crate::ingest::FitResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported state: {0}")]
    UnsupportedState(String),

    /// The state sits on (or outside) the Bloch sphere where a metric factor diverges.
    #[error("boundary singularity: {0}")]
    BoundarySingularity(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(
        "quadrature did not converge: value {value:.6e}, error estimate {error_estimate:.3e}, requested {requested:.3e}"
    )]
    Convergence {
        value: f64,
        error_estimate: f64,
        requested: f64,
    },

    #[error("fit did not converge after {iterations} iterations (rms {:.3e})", best.residual_rms)]
    FitNotConverged {
        iterations: usize,
        best: Box<FitResult>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line()).unwrap_or(0);
        match err.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            kind => Error::Parse {
                line,
                message: format!("{kind:?}"),
            },
        }
    }
}
