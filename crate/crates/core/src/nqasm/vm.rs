use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;

use super::{Instruction, NqasmError, NqasmProgram, Opcode, MEMORY_CELLS, NUM_REGISTERS};
use crate::communicator::Communicator;
use crate::engine::QubitHandle;
use crate::error::Error;
use crate::Rank;

/// Classical tag used by `csend_bit` / `crecv_bit`.
pub const BIT_TAG: &str = "nqasm-bit";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EprRole {
    Create,
    Recv,
}

/// Entanglement request recorded at a memory address by `create_epr` or
/// `recv_epr` and completed by `wait_all`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EprRequest {
    pub role: EprRole,
    /// Qubit id the EPR half is mapped to.
    pub qubit_id: i64,
    pub complete: bool,
}

#[derive(Debug, Clone)]
pub struct VmState {
    pub registers: [i64; NUM_REGISTERS],
    pub memory: Vec<i64>,
    /// Qubit id (a register value) → live qubit.
    pub qubit_map: BTreeMap<i64, QubitHandle>,
    pub pc: usize,
    pub epr_requests: BTreeMap<u8, EprRequest>,
    freed: BTreeSet<i64>,
}

impl Default for VmState {
    fn default() -> Self {
        VmState {
            registers: [0; NUM_REGISTERS],
            memory: vec![0; MEMORY_CELLS],
            qubit_map: BTreeMap::new(),
            pc: 0,
            epr_requests: BTreeMap::new(),
            freed: BTreeSet::new(),
        }
    }
}

impl VmState {
    pub fn register(&self, r: u8) -> i64 {
        self.registers[r as usize]
    }

    pub fn qubit(&self, id: i64) -> Option<QubitHandle> {
        self.qubit_map.get(&id).copied()
    }

    fn next_free_id(&self) -> i64 {
        let reserved: BTreeSet<i64> = self
            .epr_requests
            .values()
            .filter(|r| !r.complete)
            .map(|r| r.qubit_id)
            .collect();
        (0..)
            .find(|id| !self.qubit_map.contains_key(id) && !reserved.contains(id))
            .expect("unbounded range")
    }
}

struct Vm<'a> {
    comm: &'a Communicator,
    peer: Rank,
    state: VmState,
    line: usize,
}

impl Vm<'_> {
    fn rt(&self, e: Error) -> NqasmError {
        NqasmError::Runtime {
            line: self.line,
            source: Box::new(e),
        }
    }

    fn qubit(&self, reg: u8) -> Result<QubitHandle, NqasmError> {
        let id = self.state.register(reg);
        self.state
            .qubit(id)
            .ok_or(NqasmError::UnallocatedQubit {
                line: self.line,
                register: reg,
                qubit_id: id,
            })
    }

    fn bit(&self, reg: u8) -> Result<u8, NqasmError> {
        match self.state.register(reg) {
            v @ (0 | 1) => Ok(v as u8),
            value => Err(NqasmError::BadBit {
                line: self.line,
                register: reg,
                value,
            }),
        }
    }

    fn request(&mut self, role: EprRole, addr: u8) -> Result<(), NqasmError> {
        let a = addr as usize;
        let count = self.state.memory[a];
        let kind = self.state.memory.get(a + 1).copied().unwrap_or(0);
        if count != 1 || kind != 0 {
            return Err(NqasmError::BadEprRequest {
                line: self.line,
                detail: format!("@{addr} holds (pairs={count}, type={kind}); only one keep-type pair is supported"),
            });
        }
        let qubit_id = self.state.next_free_id();
        let mut req = EprRequest {
            role,
            qubit_id,
            complete: false,
        };
        if role == EprRole::Create {
            let q = self.comm.epr_create(self.peer).map_err(|e| self.rt(e))?;
            self.state.qubit_map.insert(qubit_id, q);
            self.state.freed.remove(&qubit_id);
            req.complete = true;
        }
        self.state.epr_requests.insert(addr, req);
        Ok(())
    }

    fn wait(&mut self, addr: u8) -> Result<(), NqasmError> {
        let req = *self
            .state
            .epr_requests
            .get(&addr)
            .ok_or(NqasmError::NoPendingRequest {
                line: self.line,
                address: addr,
            })?;
        if !req.complete {
            let q = self.comm.epr_recv(self.peer).map_err(|e| self.rt(e))?;
            self.state.qubit_map.insert(req.qubit_id, q);
            self.state.freed.remove(&req.qubit_id);
            if let Some(r) = self.state.epr_requests.get_mut(&addr) {
                r.complete = true;
            }
        }
        Ok(())
    }

    fn step(&mut self, ins: &Instruction) -> Result<(), NqasmError> {
        let comm = self.comm;
        match ins.opcode {
            Opcode::Set => self.state.registers[ins.reg(0) as usize] = ins.imm(1),
            Opcode::Qalloc => {
                let id = self.state.register(ins.reg(0));
                if self.state.qubit_map.contains_key(&id) {
                    return Err(NqasmError::QubitIdInUse {
                        line: self.line,
                        qubit_id: id,
                    });
                }
                let q = comm.alloc().map_err(|e| self.rt(e))?;
                self.state.qubit_map.insert(id, q);
                self.state.freed.remove(&id);
            }
            Opcode::Init => {
                let q = self.qubit(ins.reg(0))?;
                let zero = comm
                    .snapshot(&[q])
                    .map(|v| (v[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12)
                    .unwrap_or(false);
                if !zero && comm.measure(q).map_err(|e| self.rt(e))? == 1 {
                    comm.x(q).map_err(|e| self.rt(e))?;
                }
            }
            Opcode::Store => self.state.memory[ins.addr(1) as usize] = ins.imm(0),
            Opcode::CreateEpr => self.request(EprRole::Create, ins.addr(4))?,
            Opcode::RecvEpr => self.request(EprRole::Recv, ins.addr(4))?,
            Opcode::WaitAll => self.wait(ins.addr(0))?,
            Opcode::Cnot => {
                let (c, t) = (self.qubit(ins.reg(0))?, self.qubit(ins.reg(1))?);
                comm.cnot(c, t).map_err(|e| self.rt(e))?;
            }
            Opcode::H => comm.h(self.qubit(ins.reg(0))?).map_err(|e| self.rt(e))?,
            Opcode::X => comm.x(self.qubit(ins.reg(0))?).map_err(|e| self.rt(e))?,
            Opcode::Z => comm.z(self.qubit(ins.reg(0))?).map_err(|e| self.rt(e))?,
            Opcode::XIf | Opcode::ZIf => {
                let q = self.qubit(ins.reg(0))?;
                if self.bit(ins.reg(1))? == 1 {
                    let r = if ins.opcode == Opcode::XIf {
                        comm.x(q)
                    } else {
                        comm.z(q)
                    };
                    r.map_err(|e| self.rt(e))?;
                }
            }
            Opcode::Meas => {
                let q = self.qubit(ins.reg(0))?;
                let m = comm.measure(q).map_err(|e| self.rt(e))?;
                self.state.registers[ins.reg(1) as usize] = i64::from(m);
            }
            Opcode::Qfree => {
                let id = self.state.register(ins.reg(0));
                let Some(q) = self.state.qubit(id) else {
                    if self.state.freed.contains(&id) {
                        return Err(NqasmError::DoubleFree {
                            line: self.line,
                            qubit_id: id,
                        });
                    }
                    return Err(NqasmError::UnallocatedQubit {
                        line: self.line,
                        register: ins.reg(0),
                        qubit_id: id,
                    });
                };
                comm.free(q).map_err(|e| self.rt(e))?;
                self.state.qubit_map.remove(&id);
                self.state.freed.insert(id);
            }
            Opcode::CsendBit => {
                let b = self.bit(ins.reg(0))?;
                comm.csend(self.peer, BIT_TAG, vec![i64::from(b)])
                    .map_err(|e| self.rt(e))?;
            }
            Opcode::CrecvBit => {
                let msg = comm.crecv(self.peer, BIT_TAG).map_err(|e| self.rt(e))?;
                let value = match msg.payload() {
                    [v @ (0 | 1)] => *v,
                    other => {
                        return Err(self.rt(Error::BadPayload {
                            tag: BIT_TAG.into(),
                            payload: other.to_vec(),
                        }))
                    }
                };
                self.state.registers[ins.reg(0) as usize] = value;
            }
        }
        Ok(())
    }
}

/// Runs `program` on the rank owning `comm`. `peer` is the remote endpoint
/// for entanglement requests and bit transfers; the remote-node operand of
/// `create_epr`/`recv_epr` is ignored in its favour.
pub fn execute(program: &NqasmProgram, comm: &Communicator, peer: Rank) -> Result<VmState, NqasmError> {
    let mut vm = Vm {
        comm,
        peer,
        state: VmState::default(),
        line: 0,
    };
    while vm.state.pc < program.len() {
        let pc = vm.state.pc;
        vm.line = program.source_map()[pc].line;
        vm.step(&program.instructions()[pc])?;
        vm.state.pc += 1;
    }
    Ok(vm.state)
}
