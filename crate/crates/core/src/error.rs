use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("domain exponent {ell} outside supported range 0..={max}")]
    EllOutOfRange { ell: u32, max: u32 },
    #[error("coupling strength must lie in (0, 1]")]
    InvalidEpsilon,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("program references oracle position {position} but only {available} are supplied")]
    OracleOutOfRange { position: usize, available: usize },
    #[error("program uses qubit {qubit} of a {num_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("circuit malformed at gate {gate}: {reason}")]
    MalformedCircuit { gate: usize, reason: &'static str },
    #[error("world needs {needed} encoded bits, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("selector or pattern does not match the world layout")]
    ShapeMismatch,
    #[error("operation needs {needed} but the profile provides {available}")]
    ProfileInfeasible { needed: usize, available: usize },
    #[error("adversary exceeded its query budget of {cap}")]
    QueryBudget { cap: u64 },
    #[error("adversary issued a query of length {len}, cap is {cap}")]
    QueryTooLong { len: usize, cap: usize },
    #[error("adversary protocol violation: {0}")]
    Protocol(alloc::string::String),
}
