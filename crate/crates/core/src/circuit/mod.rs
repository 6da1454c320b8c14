//! Circuit programs: the instruction IR, the text format, and the compiler
//! pass that inserts swap commands for a given shard size.
//!
//! A program is a flat list of instructions parsed from `.qc` text. The
//! format is line oriented: one keyword plus integer arguments per line,
//! keywords case-insensitive, `!` starting an inline comment and `#` a
//! comment line. Phase-type gates carry the integer exponent `k` meaning a
//! phase of `2*pi / 2^k`; a negative `k` gives the inverse phase.

mod compile;
mod parse;

pub use compile::{compile_body, insert_swaps, prepare, validate_locality};
pub use parse::parse_program;

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Largest supported qubit count; the combined rank/address index must fit a
/// 64-bit integer with room to spare.
pub const MAX_QUBITS: usize = 62;

/// Phase angle encoded by the integer exponent of a phase-type gate:
/// `2*pi / 2^k`, negated for negative `k`.
pub fn phase_of_k(k: i32) -> f64 {
    let mag = std::f64::consts::TAU / (1u64 << k.unsigned_abs().min(62)) as f64;
    if k < 0 {
        -mag
    } else {
        mag
    }
}

/// A single gate operation. Qubit ids are logical; where the operands live
/// is resolved against the current layout at execution time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GateOp {
    H(usize),
    X(usize),
    Y(usize),
    XDag(usize),
    YDag(usize),
    R { k: i32, qubit: usize },
    CNot { control: usize, target: usize },
    CPhase { k: i32, control: usize, target: usize },
    CV { k: i32, control: usize, target: usize },
    Toffoli { control1: usize, control2: usize, target: usize },
}

impl GateOp {
    /// Operand qubits in mnemonic order.
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            GateOp::H(q) | GateOp::X(q) | GateOp::Y(q) | GateOp::XDag(q) | GateOp::YDag(q) => {
                vec![q]
            }
            GateOp::R { qubit, .. } => vec![qubit],
            GateOp::CNot { control, target } => vec![control, target],
            GateOp::CPhase {
                control, target, ..
            }
            | GateOp::CV {
                control, target, ..
            } => vec![control, target],
            GateOp::Toffoli {
                control1,
                control2,
                target,
            } => vec![control1, control2, target],
        }
    }

    fn mnemonic(&self) -> String {
        match *self {
            GateOp::H(q) => format!("H {q}"),
            GateOp::X(q) => format!("X {q}"),
            GateOp::Y(q) => format!("Y {q}"),
            GateOp::XDag(q) => format!("XDAG {q}"),
            GateOp::YDag(q) => format!("YDAG {q}"),
            GateOp::R { k, qubit } => format!("R {k} {qubit}"),
            GateOp::CNot { control, target } => format!("CNOT {control} {target}"),
            GateOp::CPhase { k, control, target } => format!("CPHASE {k} {control} {target}"),
            GateOp::CV { k, control, target } => format!("CV {k} {control} {target}"),
            GateOp::Toffoli {
                control1,
                control2,
                target,
            } => format!("TOFFOLI {control1} {control2} {target}"),
        }
    }
}

/// One line of a program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instruction {
    /// Declares the machine size; always the first instruction.
    Qubits(usize),
    /// Basis-state index the machine starts in.
    InitialState(u64),
    /// Advisory rank count recorded in the file; the engine may override it.
    MpiProcesses(usize),
    Gate(GateOp),
    /// Relocalization command: each pair trades one currently-local qubit
    /// against one currently-nonlocal qubit. Not a unitary swap gate.
    Swap(Vec<(usize, usize)>),
    BeginMeasurement,
    /// Expectation-value readout of the listed qubits; non-collapsing.
    DoMeasurement(Vec<usize>),
    EndMeasurement,
}

impl Instruction {
    fn write_line(&self, out: &mut String) {
        match self {
            Instruction::Qubits(l) => {
                let _ = write!(out, "QUBITS {l}");
            }
            Instruction::InitialState(i) => {
                let _ = write!(out, "INITIAL STATE {i}");
            }
            Instruction::MpiProcesses(n) => {
                let _ = write!(out, "MPIPROCESSES {n}");
            }
            Instruction::Gate(g) => {
                let _ = write!(out, "{}", g.mnemonic());
            }
            Instruction::Swap(pairs) => {
                let _ = write!(out, "SWAP {}", pairs.len());
                for (a, _) in pairs {
                    let _ = write!(out, " {a}");
                }
                for (_, b) in pairs {
                    let _ = write!(out, " {b}");
                }
            }
            Instruction::BeginMeasurement => out.push_str("BEGIN MEASUREMENT"),
            Instruction::DoMeasurement(qs) => {
                out.push_str("DO MEASUREMENT");
                for q in qs {
                    let _ = write!(out, " {q}");
                }
            }
            Instruction::EndMeasurement => out.push_str("END MEASUREMENT"),
        }
    }
}

/// An ordered instruction list plus the header facts pulled out of it.
/// Structural equality ignores source line numbers.
#[derive(Debug, Clone)]
pub struct Program {
    instructions: Vec<Instruction>,
    /// 1-based (line, col) of each instruction; (0, 0) for generated ones.
    source: Vec<(usize, usize)>,
    l: usize,
    declared_ranks: Option<usize>,
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.instructions == other.instructions
    }
}

impl Program {
    /// A program of `l` qubits starting in the all-zeros basis state with an
    /// empty body.
    pub fn new(l: usize) -> Result<Self> {
        if l == 0 || l > MAX_QUBITS {
            return Err(Error::Domain(format!(
                "qubit count {l} outside 1..={MAX_QUBITS}"
            )));
        }
        Ok(Program {
            instructions: vec![Instruction::Qubits(l), Instruction::InitialState(0)],
            source: vec![(0, 0), (0, 0)],
            l,
            declared_ranks: None,
        })
    }

    pub(crate) fn from_parts(
        instructions: Vec<Instruction>,
        source: Vec<(usize, usize)>,
        l: usize,
        declared_ranks: Option<usize>,
    ) -> Self {
        Program {
            instructions,
            source,
            l,
            declared_ranks,
        }
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn declared_ranks(&self) -> Option<usize> {
        self.declared_ranks
    }

    pub(crate) fn set_declared_ranks(&mut self, n: Option<usize>) {
        self.declared_ranks = n;
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    /// 1-based source coordinates of an instruction; (0, 0) when generated.
    pub fn source_of(&self, index: usize) -> (usize, usize) {
        self.source.get(index).copied().unwrap_or((0, 0))
    }

    /// Basis-state index declared by INITIAL STATE, if any.
    pub fn initial_state(&self) -> Option<u64> {
        self.instructions.iter().find_map(|i| match i {
            Instruction::InitialState(s) => Some(*s),
            _ => None,
        })
    }

    pub fn has_swaps(&self) -> bool {
        self.instructions
            .iter()
            .any(|i| matches!(i, Instruction::Swap(_)))
    }

    /// Append a body instruction, validating qubit ranges and distinctness.
    pub fn push(&mut self, inst: Instruction) -> Result<()> {
        self.push_at(inst, (0, 0))
    }

    pub(crate) fn push_at(&mut self, inst: Instruction, source: (usize, usize)) -> Result<()> {
        let check = |qs: &[usize], distinct: bool| -> Result<()> {
            for (i, &q) in qs.iter().enumerate() {
                if q >= self.l {
                    return Err(Error::Domain(format!("qubit {q} >= L = {}", self.l)));
                }
                if distinct && qs[..i].contains(&q) {
                    return Err(Error::Domain(format!("qubit {q} repeated")));
                }
            }
            Ok(())
        };
        match &inst {
            Instruction::Gate(g) => check(&g.qubits(), true)?,
            Instruction::DoMeasurement(qs) => check(qs, true)?,
            Instruction::Swap(pairs) => {
                if pairs.is_empty() {
                    return Err(Error::Domain("empty swap command".into()));
                }
                let all: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
                check(&all, true)?;
            }
            Instruction::InitialState(s) => {
                if self.l < 64 && *s >= (1u64 << self.l) {
                    return Err(Error::Domain(format!(
                        "initial state {s} out of range for {} qubits",
                        self.l
                    )));
                }
            }
            _ => {}
        }
        self.instructions.push(inst);
        self.source.push(source);
        Ok(())
    }

    /// Convenience: append a gate.
    pub fn gate(&mut self, g: GateOp) -> Result<()> {
        self.push(Instruction::Gate(g))
    }

    /// Canonical text form; parsing it back yields a structurally equal
    /// program.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for inst in &self.instructions {
            inst.write_line(&mut out);
            out.push('\n');
        }
        // drop the final newline to keep single-line programs tidy
        out.pop();
        out
    }

    /// Number of quantum operations `N_O`: gate instructions only, the way
    /// the benchmark tables count them. Swap commands, headers and
    /// measurement lines are excluded.
    pub fn count_operations(&self) -> usize {
        self.instructions
            .iter()
            .filter(|i| matches!(i, Instruction::Gate(_)))
            .count()
    }

    /// Qubits listed in measurement blocks, in first-mention order.
    pub fn measured_qubits(&self) -> Vec<usize> {
        let mut seen = Vec::new();
        for inst in &self.instructions {
            if let Instruction::DoMeasurement(qs) = inst {
                for &q in qs {
                    if !seen.contains(&q) {
                        seen.push(q);
                    }
                }
            }
        }
        seen
    }
}
