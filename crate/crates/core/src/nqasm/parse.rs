use super::{
    Instruction, NqasmError, NqasmProgram, Opcode, Operand, OperandKind, SourcePos, MEMORY_CELLS,
    NUM_REGISTERS,
};

/// Splits a line into whitespace-separated tokens with 1-based columns.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

fn operand(kind: OperandKind, text: &str, line: usize, column: usize) -> Result<Operand, NqasmError> {
    let bad = || NqasmError::BadOperand {
        line,
        column,
        operand: text.to_string(),
        expected: kind.describe(),
    };
    match kind {
        OperandKind::Reg => {
            let idx = text
                .strip_prefix(['R', 'r'])
                .and_then(|n| n.parse::<u8>().ok())
                .filter(|&n| (n as usize) < NUM_REGISTERS)
                .ok_or_else(bad)?;
            Ok(Operand::Reg(idx))
        }
        OperandKind::Addr => {
            let idx = text
                .strip_prefix('@')
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|&n| n < MEMORY_CELLS)
                .ok_or_else(bad)?;
            Ok(Operand::Addr(idx as u8))
        }
        OperandKind::Imm => text.parse::<i64>().map(Operand::Imm).map_err(|_| bad()),
    }
}

/// Parses assembly text. Comments and blank lines are dropped; each
/// remaining line is one instruction.
pub fn parse(text: &str) -> Result<NqasmProgram, NqasmError> {
    let mut program = NqasmProgram::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let code = raw.split('#').next().unwrap_or("");
        let toks = tokens(code);
        let Some(&(column, name)) = toks.first() else {
            continue;
        };
        let opcode = Opcode::from_name(name).ok_or_else(|| NqasmError::UnknownOpcode {
            line,
            column,
            opcode: name.to_string(),
        })?;
        let sig = opcode.signature();
        let args = &toks[1..];
        if args.len() != sig.len() {
            return Err(NqasmError::BadArity {
                line,
                opcode,
                expected: sig.len(),
                found: args.len(),
            });
        }
        let operands = sig
            .iter()
            .zip(args)
            .map(|(&kind, &(col, text))| operand(kind, text, line, col))
            .collect::<Result<Vec<_>, _>>()?;
        program.instructions.push(Instruction { opcode, operands });
        program.source_map.push(SourcePos { line, column });
    }
    Ok(program)
}

/// Canonical text for a program: one instruction per line, registers
/// upper-case, single spaces, no comments.
pub fn disassemble(program: &NqasmProgram) -> String {
    program
        .instructions
        .iter()
        .map(|i| format!("{i}\n"))
        .collect()
}
