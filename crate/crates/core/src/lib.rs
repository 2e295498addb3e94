//! Distributed quantum programming over a simulated entanglement network.
//!
//! An SPMD launcher ([`runtime`]) starts one thread per rank; every rank runs
//! the same program and talks to the others only through its
//! [`Communicator`]. Quantum state lives in a single global state vector
//! ([`engine`]) behind the network layer ([`fabric`]), which enforces
//! locality and provides EPR pairs, GHZ states and FIFO classical channels.
//! On top sit teleportation ([`p2p`]), collectives ([`collective`]) and an
//! interpreter for a small NetQASM-style assembly ([`nqasm`]).

pub mod collective;
pub mod communicator;
pub mod engine;
pub mod error;
pub mod fabric;
pub mod nqasm;
pub mod p2p;
pub mod programs;
pub mod runtime;

/// Process identifier within a communicator, in `[0, size)`.
pub type Rank = usize;

pub use collective::ExposedContext;
pub use communicator::Communicator;
pub use engine::{canonicalize_phase, fidelity, GateKind, QuantumState, QubitHandle};
pub use error::{Error, Result};
pub use fabric::{
    ClassicalMessage, EprSocket, Fabric, FabricConfig, SchedulerMode, TopologyConfig, TraceKind,
    TraceRecord,
};
pub use num_complex::Complex64;
pub use p2p::TeleportCorrections;
pub use runtime::{launch, run_spmd, LaunchSpec, RankContext, Registry, RunReport, SpmdRun};
