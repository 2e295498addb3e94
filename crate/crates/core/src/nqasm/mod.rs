//! A small NetQASM-style assembly: parser, disassembler and interpreter.
//!
//! Text format: one instruction per line, `opcode operand...` separated by
//! whitespace, `#` starts a comment. Operands are registers `R0`–`R15`,
//! memory addresses `@0`–`@255`, or integer immediates.
//!
//! | opcode       | operands                      |
//! |--------------|-------------------------------|
//! | `set`        | `Rn imm`                      |
//! | `qalloc`     | `Rn`                          |
//! | `init`       | `Rn`                          |
//! | `store`      | `imm @a`                      |
//! | `create_epr` | `remote socket imm imm @a`    |
//! | `recv_epr`   | `remote socket imm imm @a`    |
//! | `wait_all`   | `@a`                          |
//! | `cnot`       | `Rc Rt`                       |
//! | `h` `x` `z`  | `Rn`                          |
//! | `x_if` `z_if`| `Rq Rc` (apply if `Rc` ≠ 0)   |
//! | `meas`       | `Rq Rd`                       |
//! | `qfree`      | `Rn`                          |
//! | `csend_bit`  | `Rn`                          |
//! | `crecv_bit`  | `Rn`                          |
//!
//! `recv_epr`, `x_if`, `z_if`, `csend_bit` and `crecv_bit` are extensions
//! needed to write the receiving side of a two-party program.

mod parse;
mod vm;

pub use parse::{disassemble, parse};
pub use vm::{execute, EprRequest, EprRole, VmState, BIT_TAG};

use std::fmt;

use thiserror::Error;

use crate::error::Error;

pub const NUM_REGISTERS: usize = 16;
pub const MEMORY_CELLS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Opcode {
    Set,
    Qalloc,
    Init,
    Store,
    CreateEpr,
    RecvEpr,
    WaitAll,
    Cnot,
    H,
    X,
    Z,
    XIf,
    ZIf,
    Meas,
    Qfree,
    CsendBit,
    CrecvBit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperandKind {
    Reg,
    Imm,
    Addr,
}

impl OperandKind {
    fn describe(&self) -> &'static str {
        match self {
            OperandKind::Reg => "register R0-R15",
            OperandKind::Imm => "integer immediate",
            OperandKind::Addr => "address @0-@255",
        }
    }
}

use OperandKind::{Addr, Imm, Reg};

impl Opcode {
    pub const ALL: [Opcode; 17] = [
        Opcode::Set,
        Opcode::Qalloc,
        Opcode::Init,
        Opcode::Store,
        Opcode::CreateEpr,
        Opcode::RecvEpr,
        Opcode::WaitAll,
        Opcode::Cnot,
        Opcode::H,
        Opcode::X,
        Opcode::Z,
        Opcode::XIf,
        Opcode::ZIf,
        Opcode::Meas,
        Opcode::Qfree,
        Opcode::CsendBit,
        Opcode::CrecvBit,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Opcode::Set => "set",
            Opcode::Qalloc => "qalloc",
            Opcode::Init => "init",
            Opcode::Store => "store",
            Opcode::CreateEpr => "create_epr",
            Opcode::RecvEpr => "recv_epr",
            Opcode::WaitAll => "wait_all",
            Opcode::Cnot => "cnot",
            Opcode::H => "h",
            Opcode::X => "x",
            Opcode::Z => "z",
            Opcode::XIf => "x_if",
            Opcode::ZIf => "z_if",
            Opcode::Meas => "meas",
            Opcode::Qfree => "qfree",
            Opcode::CsendBit => "csend_bit",
            Opcode::CrecvBit => "crecv_bit",
        }
    }

    pub fn from_name(name: &str) -> Option<Opcode> {
        Opcode::ALL.into_iter().find(|op| op.name() == name)
    }

    pub fn signature(&self) -> &'static [OperandKind] {
        match self {
            Opcode::Set => &[Reg, Imm],
            Opcode::Store => &[Imm, Addr],
            Opcode::CreateEpr | Opcode::RecvEpr => &[Imm, Imm, Imm, Imm, Addr],
            Opcode::WaitAll => &[Addr],
            Opcode::Cnot | Opcode::Meas | Opcode::XIf | Opcode::ZIf => &[Reg, Reg],
            Opcode::Qalloc
            | Opcode::Init
            | Opcode::H
            | Opcode::X
            | Opcode::Z
            | Opcode::Qfree
            | Opcode::CsendBit
            | Opcode::CrecvBit => &[Reg],
        }
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operand {
    Reg(u8),
    Imm(i64),
    Addr(u8),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Reg(r) => write!(f, "R{r}"),
            Operand::Imm(v) => write!(f, "{v}"),
            Operand::Addr(a) => write!(f, "@{a}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub opcode: Opcode,
    pub operands: Vec<Operand>,
}

impl Instruction {
    pub(crate) fn reg(&self, i: usize) -> u8 {
        match self.operands[i] {
            Operand::Reg(r) => r,
            ref other => unreachable!("operand {i} of {} is {other}", self.opcode),
        }
    }

    pub(crate) fn imm(&self, i: usize) -> i64 {
        match self.operands[i] {
            Operand::Imm(v) => v,
            ref other => unreachable!("operand {i} of {} is {other}", self.opcode),
        }
    }

    pub(crate) fn addr(&self, i: usize) -> u8 {
        match self.operands[i] {
            Operand::Addr(a) => a,
            ref other => unreachable!("operand {i} of {} is {other}", self.opcode),
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.opcode.name())?;
        for op in &self.operands {
            write!(f, " {op}")?;
        }
        Ok(())
    }
}

/// 1-based position of an instruction in its source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourcePos {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, Default)]
pub struct NqasmProgram {
    instructions: Vec<Instruction>,
    source_map: Vec<SourcePos>,
}

impl NqasmProgram {
    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn source_map(&self) -> &[SourcePos] {
        &self.source_map
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NqasmError {
    #[error("line {line}, column {column}: unknown opcode {opcode:?}")]
    UnknownOpcode {
        line: usize,
        column: usize,
        opcode: String,
    },
    #[error("line {line}: {opcode} takes {expected} operand(s), found {found}")]
    BadArity {
        line: usize,
        opcode: Opcode,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: bad operand {operand:?}, expected {expected}")]
    BadOperand {
        line: usize,
        column: usize,
        operand: String,
        expected: &'static str,
    },
    #[error("line {line}: R{register} refers to qubit {qubit_id}, which is not allocated")]
    UnallocatedQubit {
        line: usize,
        register: u8,
        qubit_id: i64,
    },
    #[error("line {line}: qubit {qubit_id} freed twice")]
    DoubleFree { line: usize, qubit_id: i64 },
    #[error("line {line}: qubit id {qubit_id} already allocated")]
    QubitIdInUse { line: usize, qubit_id: i64 },
    #[error("line {line}: no entanglement request recorded at @{address}")]
    NoPendingRequest { line: usize, address: u8 },
    #[error("line {line}: unsupported entanglement request: {detail}")]
    BadEprRequest { line: usize, detail: String },
    #[error("line {line}: R{register} holds {value}, not a bit")]
    BadBit {
        line: usize,
        register: u8,
        value: i64,
    },
    #[error("line {line}: {source}")]
    Runtime {
        line: usize,
        #[source]
        source: Box<Error>,
    },
}

impl NqasmError {
    /// Source line the error points at.
    pub fn line(&self) -> usize {
        match self {
            NqasmError::UnknownOpcode { line, .. }
            | NqasmError::BadArity { line, .. }
            | NqasmError::BadOperand { line, .. }
            | NqasmError::UnallocatedQubit { line, .. }
            | NqasmError::DoubleFree { line, .. }
            | NqasmError::QubitIdInUse { line, .. }
            | NqasmError::NoPendingRequest { line, .. }
            | NqasmError::BadEprRequest { line, .. }
            | NqasmError::BadBit { line, .. }
            | NqasmError::Runtime { line, .. } => *line,
        }
    }
}
