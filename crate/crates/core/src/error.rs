use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit {qubit} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },

    #[error("gate acts on the same qubit {0} twice")]
    RepeatedQubit(usize),

    #[error("matrix is not unitary (deviation {0:.3e})")]
    NonUnitary(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("ancilla qubit {qubit} is not in |0> (excited population {population:.3e})")]
    AncillaNotReset { qubit: usize, population: f64 },

    #[error("selected measurement branch has zero probability")]
    ZeroProbabilityBranch,

    #[error("Pauli strings do not commute: {0} and {1}")]
    NonCommuting(String, String),

    #[error("no mutually unbiased partition found for n = {0}")]
    NoPartition(usize),

    #[error("calibration matrix is singular: {0}")]
    SingularCalibration(String),

    #[error("no feasible qubit layout: {0}")]
    NoFeasibleLayout(String),

    #[error("collapse: {0}")]
    Collapse(String),

    #[error("numerical diagnostic: {0}")]
    Diagnostic(String),

    #[error("config: {0}")]
    Config(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), message: message.into() }
    }
}
