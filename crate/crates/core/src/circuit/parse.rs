//! Text-format parser for `.qc` programs.

use crate::error::{Error, Result};

use super::{GateOp, Instruction, Program, MAX_QUBITS};

/// A token with its 1-based column.
struct Token<'a> {
    text: &'a str,
    col: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                tokens.push(Token {
                    text: &line[s..i],
                    col: s + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push(Token {
            text: &line[s..],
            col: s + 1,
        });
    }
    tokens
}

struct Cursor<'a> {
    tokens: Vec<Token<'a>>,
    next: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, what: &str) -> Result<&Token<'a>> {
        if self.next < self.tokens.len() {
            let t = &self.tokens[self.next];
            self.next += 1;
            Ok(t)
        } else {
            let col = self
                .tokens
                .last()
                .map(|t| t.col + t.text.len())
                .unwrap_or(1);
            Err(Error::parse(self.line, col, format!("expected {what}")))
        }
    }

    fn take_keyword(&mut self, word: &str) -> Result<()> {
        let line = self.line;
        let t = self.take(&format!("keyword {word}"))?;
        if t.text.eq_ignore_ascii_case(word) {
            Ok(())
        } else {
            Err(Error::parse(
                line,
                t.col,
                format!("expected keyword {word}, found '{}'", t.text),
            ))
        }
    }

    fn take_usize(&mut self, what: &str) -> Result<usize> {
        let line = self.line;
        let t = self.take(what)?;
        t.text.parse::<usize>().map_err(|_| {
            Error::parse(line, t.col, format!("malformed integer '{}' for {what}", t.text))
        })
    }

    fn take_u64(&mut self, what: &str) -> Result<u64> {
        let line = self.line;
        let t = self.take(what)?;
        t.text.parse::<u64>().map_err(|_| {
            Error::parse(line, t.col, format!("malformed integer '{}' for {what}", t.text))
        })
    }

    fn take_i32(&mut self, what: &str) -> Result<i32> {
        let line = self.line;
        let t = self.take(what)?;
        t.text.parse::<i32>().map_err(|_| {
            Error::parse(line, t.col, format!("malformed integer '{}' for {what}", t.text))
        })
    }

    fn rest_usizes(&mut self, what: &str) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        while self.next < self.tokens.len() {
            out.push(self.take_usize(what)?);
        }
        Ok(out)
    }

    fn finish(&self) -> Result<()> {
        if self.next < self.tokens.len() {
            let t = &self.tokens[self.next];
            Err(Error::parse(
                self.line,
                t.col,
                format!("unexpected trailing token '{}'", t.text),
            ))
        } else {
            Ok(())
        }
    }
}

/// Parse program text: one instruction per non-comment line. Lines starting
/// with `!` or `#` are comments, as is anything after an inline `!`.
/// Keywords are case-insensitive. Errors carry 1-based line:col positions.
pub fn parse_program(text: &str) -> Result<Program> {
    let mut program: Option<Program> = None;
    let mut in_measure_block = false;
    let mut have_initial = false;
    let mut have_gates = false;
    let mut last_line = 0;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        last_line = line;
        let body = match raw.find('!') {
            Some(i) => &raw[..i],
            None => raw,
        };
        if body.trim_start().starts_with('#') {
            continue;
        }
        let mut cur = Cursor {
            tokens: tokenize(body),
            next: 0,
            line,
        };
        if cur.tokens.is_empty() {
            continue;
        }
        let head = cur.take("keyword")?;
        let keyword = head.text.to_ascii_uppercase();
        let col = head.col;

        if program.is_none() && keyword != "QUBITS" {
            return Err(Error::parse(line, col, "program must start with QUBITS"));
        }

        let inst = match keyword.as_str() {
            "QUBITS" => {
                if program.is_some() {
                    return Err(Error::parse(line, col, "QUBITS declared twice"));
                }
                let l = cur.take_usize("qubit count")?;
                cur.finish()?;
                if l == 0 || l > MAX_QUBITS {
                    return Err(Error::parse(
                        line,
                        col,
                        format!("qubit count {l} outside 1..={MAX_QUBITS}"),
                    ));
                }
                // Parsed programs carry exactly what the text said, so do
                // not seed the INITIAL STATE 0 that Program::new adds.
                program = Some(Program::from_parts(
                    vec![Instruction::Qubits(l)],
                    vec![(line, col)],
                    l,
                    None,
                ));
                continue;
            }
            "INITIAL" => {
                cur.take_keyword("STATE")?;
                let idx = cur.take_u64("basis state index")?;
                cur.finish()?;
                if have_initial {
                    return Err(Error::parse(line, col, "INITIAL STATE declared twice"));
                }
                if have_gates {
                    return Err(Error::parse(
                        line,
                        col,
                        "INITIAL STATE must precede all gates",
                    ));
                }
                have_initial = true;
                Instruction::InitialState(idx)
            }
            "MPIPROCESSES" => {
                let n = cur.take_usize("process count")?;
                cur.finish()?;
                Instruction::MpiProcesses(n)
            }
            "H" | "X" | "Y" | "XDAG" | "YDAG" => {
                let q = cur.take_usize("qubit id")?;
                cur.finish()?;
                let g = match keyword.as_str() {
                    "H" => GateOp::H(q),
                    "X" => GateOp::X(q),
                    "Y" => GateOp::Y(q),
                    "XDAG" => GateOp::XDag(q),
                    _ => GateOp::YDag(q),
                };
                Instruction::Gate(g)
            }
            "R" => {
                let k = cur.take_i32("phase exponent")?;
                let q = cur.take_usize("qubit id")?;
                cur.finish()?;
                check_exponent(k, line, col)?;
                Instruction::Gate(GateOp::R { k, qubit: q })
            }
            "CNOT" => {
                let c = cur.take_usize("control qubit")?;
                let t = cur.take_usize("target qubit")?;
                cur.finish()?;
                Instruction::Gate(GateOp::CNot {
                    control: c,
                    target: t,
                })
            }
            "CPHASE" | "CV" => {
                let k = cur.take_i32("phase exponent")?;
                let c = cur.take_usize("control qubit")?;
                let t = cur.take_usize("target qubit")?;
                cur.finish()?;
                check_exponent(k, line, col)?;
                if keyword == "CPHASE" {
                    Instruction::Gate(GateOp::CPhase {
                        k,
                        control: c,
                        target: t,
                    })
                } else {
                    Instruction::Gate(GateOp::CV {
                        k,
                        control: c,
                        target: t,
                    })
                }
            }
            "TOFFOLI" => {
                let c1 = cur.take_usize("control qubit")?;
                let c2 = cur.take_usize("control qubit")?;
                let t = cur.take_usize("target qubit")?;
                cur.finish()?;
                Instruction::Gate(GateOp::Toffoli {
                    control1: c1,
                    control2: c2,
                    target: t,
                })
            }
            "SWAP" => {
                let k = cur.take_usize("pair count")?;
                if k == 0 {
                    return Err(Error::parse(line, col, "swap pair count must be positive"));
                }
                let mut first = Vec::with_capacity(k);
                let mut second = Vec::with_capacity(k);
                for _ in 0..k {
                    first.push(cur.take_usize("qubit id")?);
                }
                for _ in 0..k {
                    second.push(cur.take_usize("qubit id")?);
                }
                cur.finish()?;
                Instruction::Swap(first.into_iter().zip(second).collect())
            }
            "BEGIN" => {
                cur.take_keyword("MEASUREMENT")?;
                cur.finish()?;
                if in_measure_block {
                    return Err(Error::parse(line, col, "measurement block already open"));
                }
                in_measure_block = true;
                Instruction::BeginMeasurement
            }
            "DO" => {
                cur.take_keyword("MEASUREMENT")?;
                let qs = cur.rest_usizes("qubit id")?;
                if qs.is_empty() {
                    return Err(Error::parse(line, col, "DO MEASUREMENT lists no qubits"));
                }
                if !in_measure_block {
                    return Err(Error::parse(
                        line,
                        col,
                        "DO MEASUREMENT outside a measurement block",
                    ));
                }
                Instruction::DoMeasurement(qs)
            }
            "END" => {
                cur.take_keyword("MEASUREMENT")?;
                cur.finish()?;
                if !in_measure_block {
                    return Err(Error::parse(line, col, "END MEASUREMENT without BEGIN"));
                }
                in_measure_block = false;
                Instruction::EndMeasurement
            }
            other => {
                return Err(Error::parse(line, col, format!("unknown keyword '{other}'")));
            }
        };

        if matches!(inst, Instruction::Gate(_)) {
            if !have_initial {
                return Err(Error::parse(
                    line,
                    col,
                    "gate before INITIAL STATE declaration",
                ));
            }
            have_gates = true;
        }

        let program = program.as_mut().expect("QUBITS seen");
        program
            .push_at(inst, (line, col))
            .map_err(|e| match e {
                Error::Domain(msg) => Error::parse(line, col, msg),
                other => other,
            })?;
    }

    let mut program =
        program.ok_or_else(|| Error::parse(last_line.max(1), 1, "empty program: QUBITS missing"))?;
    if in_measure_block {
        return Err(Error::parse(
            last_line,
            1,
            "measurement block not closed at end of input",
        ));
    }
    // Record the advisory rank count if one was declared.
    let declared = program.instructions().iter().find_map(|i| match i {
        Instruction::MpiProcesses(n) => Some(*n),
        _ => None,
    });
    program.set_declared_ranks(declared);
    Ok(program)
}

fn check_exponent(k: i32, line: usize, col: usize) -> Result<()> {
    if k.unsigned_abs() > 62 {
        Err(Error::parse(
            line,
            col,
            format!("phase exponent {k} outside -62..=62"),
        ))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_basic_keywords() {
        let text = "\
QUBITS 4
INITIAL STATE 0
MPIPROCESSES 2
h 0
R 3 1
CPHASE -2 0 1
CV 1 2 3
CNOT 0 2
TOFFOLI 0 1 2
SWAP 1 0 3
BEGIN MEASUREMENT
DO MEASUREMENT 0 1 2 3
END MEASUREMENT";
        let p = parse_program(text).unwrap();
        assert_eq!(p.l(), 4);
        assert_eq!(p.declared_ranks(), Some(2));
        assert_eq!(p.initial_state(), Some(0));
        assert_eq!(p.count_operations(), 6);
        assert!(p.has_swaps());
    }

    #[test]
    fn swap_groups_pair_positionally() {
        let text = "QUBITS 32\nINITIAL STATE 0\nSWAP 5 31 1 2 3 4 0 27 28 29 30";
        let p = parse_program(text).unwrap();
        let Instruction::Swap(pairs) = &p.instructions()[2] else {
            panic!("expected swap");
        };
        assert_eq!(pairs, &[(31, 0), (1, 27), (2, 28), (3, 29), (4, 30)]);
    }

    #[test]
    fn comments_are_stripped() {
        let text = "\
QUBITS 4                 ! machine size
! only a comment
# another comment style
  ! indented comment
INITIAL STATE 0";
        let p = parse_program(text).unwrap();
        assert_eq!(p.instructions().len(), 2);
    }

    #[test]
    fn errors_carry_line_and_column() {
        let e = parse_program("QUBITS 4\nINITIAL STATE 0\nFOO 1").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, col: 1, .. }), "{e}");

        let e = parse_program("QUBITS 4\nINITIAL STATE 0\nH x").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, col: 3, .. }), "{e}");

        let e = parse_program("QUBITS 4\nINITIAL STATE 0\nH 4").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");

        let e = parse_program("QUBITS 4\nINITIAL STATE 0\nCNOT 1").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
    }

    #[test]
    fn structural_rules() {
        assert!(parse_program("H 0").is_err());
        assert!(parse_program("QUBITS 4\nH 0").is_err()); // no initial state
        assert!(parse_program("QUBITS 4\nINITIAL STATE 0\nDO MEASUREMENT 1").is_err());
        assert!(parse_program("QUBITS 4\nINITIAL STATE 0\nBEGIN MEASUREMENT").is_err());
        assert!(parse_program("QUBITS 4\nINITIAL STATE 0\nEND MEASUREMENT").is_err());
        assert!(parse_program("QUBITS 4\nINITIAL STATE 0\nINITIAL STATE 1").is_err());
        assert!(parse_program("").is_err());
    }

    #[test]
    fn roundtrip_is_structurally_exact() {
        let text = "QUBITS 6\nINITIAL STATE 9\nH 0\nCPHASE 2 0 5\nSWAP 2 0 1 4 5\nBEGIN MEASUREMENT\nDO MEASUREMENT 0 5\nEND MEASUREMENT";
        let p = parse_program(text).unwrap();
        let q = parse_program(&p.serialize()).unwrap();
        assert_eq!(p, q);
    }
}
