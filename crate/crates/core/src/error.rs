use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{requested} qubits exceeds the simulator capacity of {capacity}")]
    Capacity { requested: usize, capacity: usize },

    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    QubitIndex { index: usize, n_qubits: usize },

    #[error("basis index {index} out of range for dimension {dimension}")]
    BasisIndex { index: usize, dimension: usize },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("no configuration has cost <= {epsilon:e}; raise epsilon or coarsen the grid")]
    NoSolution { epsilon: f64 },

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Training { epoch: usize, loss: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
