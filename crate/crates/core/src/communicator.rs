//! Per-rank communicator: rank/size, the automatically built EPR-socket mesh
//! and thin wrappers over the fabric's local quantum operations.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::engine::{GateKind, QubitHandle};
use crate::error::{Error, Result};
use crate::fabric::{ClassicalMessage, EprSocket, Fabric};
use crate::Rank;

pub struct Communicator {
    rank: Rank,
    size: usize,
    fabric: Arc<Fabric>,
    epr_table: BTreeMap<Rank, EprSocket>,
    pub(crate) exposed: Option<u64>,
    pub(crate) next_generation: u64,
}

impl std::fmt::Debug for Communicator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Communicator")
            .field("rank", &self.rank)
            .field("size", &self.size)
            .field("epr_table", &self.epr_table)
            .finish()
    }
}

impl Communicator {
    /// Registers `rank` with the fabric and builds one EPR socket per
    /// connected peer. Fails if the rank was already initialised or if `size`
    /// disagrees with the fabric.
    pub fn init(rank: Rank, size: usize, fabric: Arc<Fabric>) -> Result<Self> {
        if rank >= size {
            return Err(Error::RankOutOfRange { rank, size });
        }
        fabric.register_communicator(rank, size)?;
        let epr_table = (0..size)
            .filter(|&peer| fabric.connected(rank, peer))
            .map(|peer| Ok((peer, EprSocket::new(rank, peer)?)))
            .collect::<Result<_>>()?;
        Ok(Communicator {
            rank,
            size,
            fabric,
            epr_table,
            exposed: None,
            next_generation: 0,
        })
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn fabric(&self) -> &Arc<Fabric> {
        &self.fabric
    }

    /// Routing table: peer rank → socket.
    pub fn epr_table(&self) -> &BTreeMap<Rank, EprSocket> {
        &self.epr_table
    }

    pub fn epr_socket(&self, peer: Rank) -> Result<EprSocket> {
        if peer >= self.size {
            return Err(Error::UnknownNode(peer));
        }
        if peer == self.rank {
            return Err(Error::SelfSend(peer));
        }
        self.epr_table
            .get(&peer)
            .copied()
            .ok_or(Error::NotConnected(self.rank, peer))
    }

    pub fn alloc(&self) -> Result<QubitHandle> {
        self.fabric.alloc(self.rank)
    }

    pub fn h(&self, q: QubitHandle) -> Result<()> {
        self.fabric.apply_gate(self.rank, GateKind::H(q))
    }

    pub fn x(&self, q: QubitHandle) -> Result<()> {
        self.fabric.apply_gate(self.rank, GateKind::X(q))
    }

    pub fn z(&self, q: QubitHandle) -> Result<()> {
        self.fabric.apply_gate(self.rank, GateKind::Z(q))
    }

    pub fn cnot(&self, control: QubitHandle, target: QubitHandle) -> Result<()> {
        self.fabric
            .apply_gate(self.rank, GateKind::Cnot { control, target })
    }

    pub fn measure(&self, q: QubitHandle) -> Result<u8> {
        self.fabric.measure(self.rank, q)
    }

    pub fn free(&self, q: QubitHandle) -> Result<()> {
        self.fabric.free(self.rank, q)
    }

    pub fn prepare(&self, q: QubitHandle, alpha: Complex64, beta: Complex64) -> Result<()> {
        self.fabric.prepare(self.rank, q, alpha, beta)
    }

    pub fn epr_create(&self, peer: Rank) -> Result<QubitHandle> {
        let socket = self.epr_socket(peer)?;
        self.fabric.epr_create(&socket, self.rank)
    }

    pub fn epr_recv(&self, peer: Rank) -> Result<QubitHandle> {
        let socket = self.epr_socket(peer)?;
        self.fabric.epr_recv(&socket, self.rank)
    }

    pub fn csend(&self, to: Rank, tag: &str, payload: Vec<i64>) -> Result<()> {
        self.fabric
            .csend(self.rank, to, ClassicalMessage::new(tag, payload))
    }

    pub fn crecv(&self, from: Rank, tag: &str) -> Result<ClassicalMessage> {
        self.fabric.crecv(self.rank, from, tag)
    }

    pub fn flush(&self) -> Result<()> {
        self.fabric.flush(self.rank)
    }

    /// Returns the barrier generation this call completed.
    pub fn barrier(&self) -> Result<u64> {
        self.fabric.barrier(self.rank)
    }

    /// Reduced state of qubits; they must factor out of the global state.
    pub fn snapshot(&self, handles: &[QubitHandle]) -> Result<Vec<Complex64>> {
        self.fabric.snapshot_as(self.rank, handles)
    }

    /// Collective snapshot of every rank's contributed qubits, rank-major.
    pub fn probe(&self, label: &str, handles: &[QubitHandle]) -> Result<Vec<Complex64>> {
        self.fabric.probe(self.rank, label, handles)
    }
}
