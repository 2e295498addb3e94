use thiserror::Error;

use crate::nqasm::NqasmError;
use crate::Rank;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the runtime, fabric, engine and primitives can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("qubit capacity exceeded (cap {cap})")]
    CapacityExceeded { cap: usize },
    #[error("qubit {0} is not live")]
    DeadHandle(u64),
    #[error("CNOT control and target are the same qubit ({0})")]
    SameQubitCnot(u64),
    #[error("qubit {0} is still entangled with the rest of the state")]
    StillEntangled(u64),
    #[error("requested qubits are not separable from the rest of the state")]
    NotSeparable,
    #[error("GHZ state needs at least two owners, got {0}")]
    TooFewOwners(usize),
    #[error("rank {0} listed more than once")]
    DuplicateOwner(Rank),
    #[error("invalid amplitudes for state preparation")]
    InvalidAmplitudes,

    #[error("ranks {0} and {1} are not connected")]
    NotConnected(Rank, Rank),
    #[error("unknown node {0}")]
    UnknownNode(Rank),
    #[error("rank {rank} cannot operate on qubit {qubit} owned by rank {owner}")]
    LocalityViolation { rank: Rank, qubit: u64, owner: Rank },
    #[error("rank {rank} is not an endpoint of socket ({a},{b})")]
    NotEndpoint { rank: Rank, a: Rank, b: Rank },
    #[error("expected tag {expected:?} at head of channel, found {found:?}")]
    TagMismatch { expected: String, found: String },
    #[error("rank {rank} timed out waiting in {op}")]
    DeadlockTimeout { rank: Rank, op: String },
    #[error("global deadlock: every live rank is blocked")]
    GlobalDeadlock,
    #[error("run shut down after a failure on another rank")]
    Shutdown,

    #[error("communicator for rank {0} already initialised")]
    DuplicateInit(Rank),
    #[error("communicator size {got} does not match fabric size {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("rank {rank} out of range for size {size}")]
    RankOutOfRange { rank: Rank, size: usize },

    #[error("qubit {qubit} is owned by rank {owner}, not rank {rank}")]
    NotOwner { rank: Rank, qubit: u64, owner: Rank },
    #[error("rank {0} cannot send to itself")]
    SelfSend(Rank),
    #[error("malformed classical payload under tag {tag:?}: {payload:?}")]
    BadPayload { tag: String, payload: Vec<i64> },

    #[error("expected {expected} qubits, got {got}")]
    WrongCount { expected: usize, got: usize },
    #[error("an exposed context is already live on this communicator")]
    NestedExpose,
    #[error("exposed context is no longer live")]
    StaleContext,
    #[error("exposed share {0} was measured or freed while exposed")]
    ShareTampered(u64),
    #[error("context was exposed from root {expected}, not {got}")]
    RootMismatch { expected: Rank, got: Rank },

    #[error("program {0:?} already registered")]
    DuplicateName(String),
    #[error("unknown program {0:?}")]
    UnknownProgram(String),
    #[error("rank {rank} failed: {source}")]
    RankPanic { rank: Rank, source: Box<Error> },
    #[error("panic: {0}")]
    Panicked(String),
    #[error("{0}")]
    Program(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),

    #[error(transparent)]
    Nqasm(#[from] Box<NqasmError>),
}

impl From<NqasmError> for Error {
    fn from(e: NqasmError) -> Self {
        Error::Nqasm(Box::new(e))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
