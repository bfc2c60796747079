use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate. Each variant maps onto one of the
/// process exit classes used by the command line front end.
#[derive(Debug, Error)]
pub enum KineticError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("numerical abort at t = {time}: {message}")]
    NumericalAbort { time: f64, message: String },

    #[error("characteristic left the x-grid at s = {s}")]
    DomainExit { s: f64 },

    #[error("Picard iteration did not converge in {iterations} iterations (last increment {last_increment:e})")]
    NoConvergence {
        iterations: usize,
        last_increment: f64,
        increments: Vec<f64>,
    },

    #[error("communication weight has zero integral")]
    ZeroWeight,

    #[error("mono-kinetic blow-up between t = {t0} and t = {t1}")]
    BlowUp { t0: f64, t1: f64 },

    #[error("no marker crossing has occurred yet")]
    NotBlownUp,

    #[error("pullback support clipped: {clipped_mass:e} of mass left the grid")]
    SupportClipped { clipped_mass: f64 },

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data in {}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl KineticError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KineticError::Io {
            path: path.into(),
            source,
        }
    }

    /// Exit code class: 1 = configuration, 2 = numerical abort, 3 = I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            KineticError::Parse { .. }
            | KineticError::Validation(_)
            | KineticError::InvalidGrid(_)
            | KineticError::ZeroWeight => 1,
            KineticError::MissingFile(_) | KineticError::Io { .. } | KineticError::Format { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, KineticError>;
