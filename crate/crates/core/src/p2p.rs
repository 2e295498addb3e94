//! Point-to-point state transfer by teleportation.
//!
//! Wire format: one classical message tagged [`TELEPORT_TAG`] with payload
//! `[m1, m2]`, where `m1` is the payload measurement (after H) and `m2` the
//! sender's EPR-half measurement.

use crate::communicator::Communicator;
use crate::engine::QubitHandle;
use crate::error::{Error, Result};
use crate::Rank;

pub const TELEPORT_TAG: &str = "teleport-corr";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TeleportCorrections {
    pub m1: u8,
    pub m2: u8,
}

impl TeleportCorrections {
    pub fn to_payload(self) -> Vec<i64> {
        vec![i64::from(self.m1), i64::from(self.m2)]
    }

    pub fn from_payload(payload: &[i64]) -> Result<Self> {
        match *payload {
            [m1 @ (0 | 1), m2 @ (0 | 1)] => Ok(TeleportCorrections {
                m1: m1 as u8,
                m2: m2 as u8,
            }),
            _ => Err(Error::BadPayload {
                tag: TELEPORT_TAG.into(),
                payload: payload.to_vec(),
            }),
        }
    }
}

impl Communicator {
    fn check_peer(&self, peer: Rank) -> Result<()> {
        if peer >= self.size() {
            return Err(Error::UnknownNode(peer));
        }
        if peer == self.rank() {
            return Err(Error::SelfSend(peer));
        }
        Ok(())
    }

    /// Teleports `payload` to `dest`. The payload and the local EPR half are
    /// measured and freed; the state continues in `dest`'s EPR half.
    /// Returns once the corrections are enqueued.
    pub fn qsend(&self, payload: QubitHandle, dest: Rank) -> Result<TeleportCorrections> {
        self.check_peer(dest)?;
        if payload.owner() != self.rank() {
            return Err(Error::NotOwner {
                rank: self.rank(),
                qubit: payload.id(),
                owner: payload.owner(),
            });
        }
        if !self.fabric().is_live(payload) {
            return Err(Error::DeadHandle(payload.id()));
        }
        let epr = self.epr_create(dest)?;
        self.cnot(payload, epr)?;
        self.h(payload)?;
        let m1 = self.measure(payload)?;
        let m2 = self.measure(epr)?;
        let corr = TeleportCorrections { m1, m2 };
        self.csend(dest, TELEPORT_TAG, corr.to_payload())?;
        self.free(payload)?;
        self.free(epr)?;
        self.flush()?;
        Ok(corr)
    }

    /// Teleports one half of an entangled pair; identical to [`Self::qsend`].
    pub fn qsend_entangled_half(&self, payload: QubitHandle, dest: Rank) -> Result<TeleportCorrections> {
        self.qsend(payload, dest)
    }

    /// Receives a teleported qubit from `source`, applying X if `m2` and then
    /// Z if `m1`.
    pub fn qrecv(&self, source: Rank) -> Result<QubitHandle> {
        self.qrecv_with_corrections(source).map(|(q, _)| q)
    }

    pub fn qrecv_with_corrections(&self, source: Rank) -> Result<(QubitHandle, TeleportCorrections)> {
        self.check_peer(source)?;
        let epr = self.epr_recv(source)?;
        let msg = self.crecv(source, TELEPORT_TAG)?;
        let corr = TeleportCorrections::from_payload(msg.payload())?;
        if corr.m2 == 1 {
            self.x(epr)?;
        }
        if corr.m1 == 1 {
            self.z(epr)?;
        }
        self.flush()?;
        Ok((epr, corr))
    }
}
