use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count mismatch: {left} vs {right}")]
    QubitMismatch { left: usize, right: usize },

    #[error("index {index} out of range for {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid Pauli string {0:?}")]
    InvalidPauli(String),

    #[error("operator is not Hermitian (largest imaginary coefficient {0:e})")]
    NotHermitian(f64),

    #[error("generator is not anti-Hermitian (largest real coefficient {0:e})")]
    NotAntiHermitian(f64),

    #[error("expectation value has imaginary residue {0:e}")]
    ComplexExpectation(f64),

    #[error("{n_qubits} qubits exceeds the simulator limit of {limit}")]
    TooManyQubits { n_qubits: usize, limit: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid electron count {n_electrons} for {n_qubits} qubits")]
    ElectronCount { n_electrons: usize, n_qubits: usize },

    #[error("expected a {expected} pool, got {found}")]
    PoolKind { expected: String, found: String },

    #[error("operator pool is empty")]
    EmptyPool,

    #[error("search direction is not a descent direction (slope {0:e})")]
    NotDescent(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("ADAPT iteration {adapt_iteration}, optimizer iteration {optimizer_iteration}")]
    AtIteration {
        adapt_iteration: usize,
        optimizer_iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("{path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Tags an error with the optimizer iteration it occurred in.
    pub(crate) fn in_optimizer(self, optimizer_iteration: usize) -> Self {
        match self {
            e @ Error::AtIteration { .. } => e,
            e => Error::AtIteration {
                adapt_iteration: 0,
                optimizer_iteration,
                source: Box::new(e),
            },
        }
    }

    /// Tags an error with the ADAPT iteration it occurred in, keeping any
    /// optimizer iteration already attached.
    pub(crate) fn in_adapt(self, adapt_iteration: usize) -> Self {
        match self {
            Error::AtIteration {
                optimizer_iteration,
                source,
                ..
            } => Error::AtIteration {
                adapt_iteration,
                optimizer_iteration,
                source,
            },
            e => Error::AtIteration {
                adapt_iteration,
                optimizer_iteration: 0,
                source: Box::new(e),
            },
        }
    }
}
