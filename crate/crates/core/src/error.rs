//! Crate-wide error type.

use std::fmt;

#[derive(Debug, Clone)]
pub enum Error {
    /// Bad grid construction parameters.
    InvalidGrid(String),
    /// Index past the end of a container.
    IndexOutOfRange { index: usize, len: usize },
    /// Two sized operands disagree.
    SizeMismatch { expected: usize, got: usize, what: &'static str },
    /// Parameter outside its admissible range.
    InvalidParameter(String),
    /// Iterative solver stopped before reaching the requested residual.
    SolverDidNotConverge { iterations: usize, residual: f64, tol: f64 },
    /// Incomplete factorization broke down even after diagonal shifts.
    FactorizationBreakdown { attempts: usize },
    /// Matrix is numerically singular.
    SingularMatrix,
    /// Problem construction is inconsistent (overlapping regions, bad BCs, ...).
    InvalidProblem(String),
    /// Unknown catalog problem name.
    UnknownProblem(String),
    /// Configuration file or flag error.
    Config(String),
    /// File I/O, tagged with the path.
    Io(String),
    /// A phase of the optimization loop failed.
    Phase { phase: &'static str, iteration: usize, source: Box<Error> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range (len {len})")
            }
            Error::SizeMismatch { expected, got, what } => {
                write!(f, "size mismatch for {what}: expected {expected}, got {got}")
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::SolverDidNotConverge { iterations, residual, tol } => write!(
                f,
                "solver did not converge: residual {residual:.3e} > tol {tol:.3e} after {iterations} iterations"
            ),
            Error::FactorizationBreakdown { attempts } => {
                write!(f, "incomplete Cholesky breakdown after {attempts} shift attempts")
            }
            Error::SingularMatrix => write!(f, "matrix is singular"),
            Error::InvalidProblem(msg) => write!(f, "invalid problem: {msg}"),
            Error::UnknownProblem(name) => write!(f, "unknown problem '{name}'"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Io(msg) => write!(f, "io error: {msg}"),
            Error::Phase { phase, iteration, source } => {
                write!(f, "iteration {iteration}, phase '{phase}': {source}")
            }
        }
    }
}

impl std::error::Error for Error {}

impl Error {
    /// Attach loop context to an error bubbling out of a pipeline phase.
    pub fn in_phase(self, phase: &'static str, iteration: usize) -> Self {
        Error::Phase { phase, iteration, source: Box::new(self) }
    }
}
