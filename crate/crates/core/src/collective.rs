//! Collective operations. Every rank of the communicator must call the same
//! collective, in the same order, with the same root.
//!
//! Classical wire formats (tag: payload):
//!
//! | tag             | direction        | payload          |
//! |-----------------|------------------|------------------|
//! | `scatter-hdr`   | root → rank i    | `[root, i]`      |
//! | `gather-hdr`    | rank i → root    | `[i, root]`      |
//! | `expose-corr`   | root → rank i    | `[m]`            |
//! | `unexpose-corr` | rank i → root    | `[m_i]`          |
//!
//! Headers precede the teleport of the corresponding element, so a rank that
//! runs a different collective than its peer fails with a tag mismatch rather
//! than consuming the wrong qubit.

use crate::communicator::Communicator;
use crate::engine::QubitHandle;
use crate::error::{Error, Result};
use crate::Rank;

pub const SCATTER_HDR: &str = "scatter-hdr";
pub const GATHER_HDR: &str = "gather-hdr";
pub const EXPOSE_TAG: &str = "expose-corr";
pub const UNEXPOSE_TAG: &str = "unexpose-corr";

/// A live expose on one rank. On the root the share is the original data
/// qubit; elsewhere it is that rank's GHZ share.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExposedContext {
    root: Rank,
    local_share: QubitHandle,
    generation: u64,
}

impl ExposedContext {
    pub fn root(&self) -> Rank {
        self.root
    }

    pub fn local_share(&self) -> QubitHandle {
        self.local_share
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }
}

fn expect_header(payload: &[i64], tag: &str, want: [i64; 2]) -> Result<()> {
    if payload != want {
        return Err(Error::BadPayload {
            tag: tag.into(),
            payload: payload.to_vec(),
        });
    }
    Ok(())
}

fn bit(payload: &[i64], tag: &str) -> Result<u8> {
    match *payload {
        [b @ (0 | 1)] => Ok(b as u8),
        _ => Err(Error::BadPayload {
            tag: tag.into(),
            payload: payload.to_vec(),
        }),
    }
}

impl Communicator {
    fn check_root(&self, root: Rank) -> Result<()> {
        if root >= self.size() {
            return Err(Error::UnknownNode(root));
        }
        Ok(())
    }

    fn check_owned(&self, q: QubitHandle) -> Result<()> {
        if q.owner() != self.rank() {
            return Err(Error::NotOwner {
                rank: self.rank(),
                qubit: q.id(),
                owner: q.owner(),
            });
        }
        Ok(())
    }

    /// Element `i` of the root's list goes to rank `i`; the root keeps its
    /// own element without teleporting it. Each rank gets a one-element list.
    pub fn qscatter(&self, qubits: &[QubitHandle], root: Rank) -> Result<Vec<QubitHandle>> {
        self.check_root(root)?;
        if self.rank() == root {
            if qubits.len() != self.size() {
                return Err(Error::WrongCount {
                    expected: self.size(),
                    got: qubits.len(),
                });
            }
            for &q in qubits {
                self.check_owned(q)?;
            }
        }
        self.fabric().mark_collective(self.rank(), "qscatter", root)?;
        let out = if self.rank() == root {
            for (dest, &q) in qubits.iter().enumerate() {
                if dest != root {
                    self.csend(dest, SCATTER_HDR, vec![root as i64, dest as i64])?;
                    self.qsend(q, dest)?;
                }
            }
            qubits[root]
        } else {
            let hdr = self.crecv(root, SCATTER_HDR)?;
            expect_header(hdr.payload(), SCATTER_HDR, [root as i64, self.rank() as i64])?;
            self.qrecv(root)?
        };
        self.flush()?;
        Ok(vec![out])
    }

    /// Moves one qubit from every rank to the root. The root gets them in
    /// source-rank order; other ranks get an empty list.
    pub fn qgather(&self, qubit: QubitHandle, root: Rank) -> Result<Vec<QubitHandle>> {
        self.check_root(root)?;
        self.check_owned(qubit)?;
        self.fabric().mark_collective(self.rank(), "qgather", root)?;
        let out = if self.rank() == root {
            let mut gathered = Vec::with_capacity(self.size());
            for src in 0..self.size() {
                if src == root {
                    gathered.push(qubit);
                } else {
                    let hdr = self.crecv(src, GATHER_HDR)?;
                    expect_header(hdr.payload(), GATHER_HDR, [src as i64, root as i64])?;
                    gathered.push(self.qrecv(src)?);
                }
            }
            gathered
        } else {
            self.csend(root, GATHER_HDR, vec![self.rank() as i64, root as i64])?;
            self.qsend(qubit, root)?;
            Vec::new()
        };
        self.flush()?;
        Ok(out)
    }

    /// Spreads the root's data qubit `α|0⟩ + β|1⟩` into
    /// `α|0…0⟩ + β|1…1⟩` across one qubit per rank, using a fresh GHZ state:
    /// the root entangles its data qubit with its GHZ share, measures the
    /// share and sends the outcome `m` to every other rank, which applies
    /// `X^m` to its own share.
    pub fn expose(&mut self, qubits: &[QubitHandle], root: Rank) -> Result<ExposedContext> {
        self.check_root(root)?;
        if self.exposed.is_some() {
            return Err(Error::NestedExpose);
        }
        let is_root = self.rank() == root;
        if is_root {
            if qubits.len() != 1 {
                return Err(Error::WrongCount {
                    expected: 1,
                    got: qubits.len(),
                });
            }
            self.check_owned(qubits[0])?;
        }
        self.fabric().mark_collective(self.rank(), "expose", root)?;

        let local_share = if self.size() == 1 {
            qubits[0]
        } else if is_root {
            let data = qubits[0];
            let owners: Vec<Rank> = (0..self.size()).collect();
            let share = self.fabric().ghz_create(&owners, root)?;
            self.cnot(data, share)?;
            let m = self.measure(share)?;
            self.free(share)?;
            for r in (0..self.size()).filter(|&r| r != root) {
                self.csend(r, EXPOSE_TAG, vec![i64::from(m)])?;
            }
            data
        } else {
            let share = self.fabric().ghz_recv(self.rank(), root)?;
            let msg = self.crecv(root, EXPOSE_TAG)?;
            if bit(msg.payload(), EXPOSE_TAG)? == 1 {
                self.x(share)?;
            }
            share
        };
        self.flush()?;

        let generation = self.next_generation;
        self.next_generation += 1;
        self.exposed = Some(generation);
        Ok(ExposedContext {
            root,
            local_share,
            generation,
        })
    }

    /// Undoes [`Self::expose`]: non-root ranks measure their share in the X
    /// basis and report the outcome; the root applies `Z` to its data qubit
    /// if the outcomes have odd parity.
    pub fn unexpose(&mut self, ctx: &ExposedContext, root: Rank) -> Result<()> {
        if self.exposed != Some(ctx.generation) {
            return Err(Error::StaleContext);
        }
        if ctx.root != root {
            return Err(Error::RootMismatch {
                expected: ctx.root,
                got: root,
            });
        }
        self.fabric().mark_collective(self.rank(), "unexpose", root)?;
        let is_root = self.rank() == root;
        if !is_root {
            let share = ctx.local_share;
            if !self.fabric().is_live(share) || self.fabric().was_measured(share)? {
                self.exposed = None;
                return Err(Error::ShareTampered(share.id()));
            }
        }
        self.exposed = None;

        if is_root {
            let mut parity = 0;
            for r in (0..self.size()).filter(|&r| r != root) {
                let msg = self.crecv(r, UNEXPOSE_TAG)?;
                parity ^= bit(msg.payload(), UNEXPOSE_TAG)?;
            }
            if parity == 1 {
                self.z(ctx.local_share)?;
            }
        } else {
            let share = ctx.local_share;
            self.h(share)?;
            let m = self.measure(share)?;
            self.free(share)?;
            self.csend(root, UNEXPOSE_TAG, vec![i64::from(m)])?;
        }
        self.flush()
    }
}
