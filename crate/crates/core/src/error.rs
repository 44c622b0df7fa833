use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("qubit index {index} out of range for {qubit_count} qubits")]
    QubitOutOfRange { index: usize, qubit_count: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("ancilla rejected {attempts} times in a row (trial {trial})")]
    AncillaRejectionCap { attempts: u32, trial: u64 },
    #[error("malformed data: {0}")]
    Parse(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
