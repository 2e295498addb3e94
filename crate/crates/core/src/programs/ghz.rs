//! GHZ state over every rank of the communicator via expose/unexpose.

use crate::communicator::Communicator;
use crate::error::{Error, Result};
use crate::runtime::RankContext;
use crate::Rank;

/// Label of the collective snapshot taken just before measurement.
pub const PROBE_LABEL: &str = "ghz";

pub fn ghz_example(comm: &mut Communicator, root: Rank) -> Result<u8> {
    if comm.size() < 2 {
        return Err(Error::Program("ghz needs at least 2 ranks".into()));
    }
    let mut qubits = Vec::new();
    if comm.rank() == root {
        let q = comm.alloc()?;
        comm.h(q)?;
        qubits.push(q);
    }
    let exposed = comm.expose(&qubits, root)?;
    let mine = if comm.rank() == root {
        exposed.local_share()
    } else {
        let target = comm.alloc()?;
        comm.cnot(exposed.local_share(), target)?;
        target
    };
    comm.unexpose(&exposed, root)?;
    comm.probe(PROBE_LABEL, &[mine])?;
    let bit = comm.measure(mine)?;
    comm.free(mine)?;
    Ok(bit)
}

pub fn main(ctx: &mut RankContext) -> Result<()> {
    let bit = ghz_example(ctx.comm_mut(), 0)?;
    ctx.report_bits(&[bit]);
    Ok(())
}
