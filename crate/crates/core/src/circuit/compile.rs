//! Locality checking and the swap-inserting compiler pass.
//!
//! Both walk the program with a symbolic copy of the qubit permutation —
//! no amplitudes are ever allocated, so a 32-qubit program validates fine
//! on a laptop.

use crate::error::{Error, Result};
use crate::layout::{EvictionPolicy, QubitPermutation};

use super::{Instruction, Program};

/// Check that every gate and measurement only touches local qubits and that
/// every swap command pairs one local with one nonlocal qubit, under shard
/// size `2^m`. Returns the first violating instruction as a diagnostic.
pub fn validate_locality(program: &Program, m: usize) -> Result<()> {
    let l = program.l();
    if m > l {
        return Err(Error::Config(format!("m = {m} exceeds L = {l}")));
    }
    let mut sigma = QubitPermutation::identity(l, m);
    for (idx, inst) in program.instructions().iter().enumerate() {
        let (line, col) = program.source_of(idx);
        match inst {
            Instruction::Gate(g) => {
                for q in g.qubits() {
                    if !sigma.is_local(q) {
                        return Err(Error::diagnostic(
                            line,
                            col,
                            format!(
                                "gate operand qubit {q} is nonlocal (position {}, m = {m})",
                                sigma.position_of(q)
                            ),
                        ));
                    }
                }
            }
            Instruction::DoMeasurement(qs) => {
                for &q in qs {
                    if !sigma.is_local(q) {
                        return Err(Error::diagnostic(
                            line,
                            col,
                            format!("measured qubit {q} is nonlocal (m = {m})"),
                        ));
                    }
                }
            }
            Instruction::Swap(pairs) => {
                if pairs.len() > m.min(l - m) {
                    return Err(Error::diagnostic(
                        line,
                        col,
                        format!(
                            "swap of {} pairs exceeds min(m, L-m) = {}",
                            pairs.len(),
                            m.min(l - m)
                        ),
                    ));
                }
                let mut transpositions = Vec::with_capacity(pairs.len());
                for &(a, b) in pairs {
                    match (sigma.is_local(a), sigma.is_local(b)) {
                        (true, false) | (false, true) => {
                            transpositions.push((sigma.position_of(a), sigma.position_of(b)));
                        }
                        (both_local, _) => {
                            let kind = if both_local { "local" } else { "nonlocal" };
                            return Err(Error::diagnostic(
                                line,
                                col,
                                format!("swap pair ({a}, {b}) joins two {kind} qubits"),
                            ));
                        }
                    }
                }
                for (p1, p2) in transpositions {
                    sigma.transpose_positions(p1, p2);
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// Insert swap commands so that every gate and measurement in `logical` acts
/// on local qubits when sharded at `2^m` amplitudes per rank. At most
/// `k_max` pairs are exchanged per inserted swap; an instruction whose
/// operands cannot all be local at once is a compilation error.
///
/// Compilation is greedy per instruction: a gate on one nonlocal qubit gets
/// exactly one single-pair swap, and a measurement list is split into the
/// currently-local qubits followed by relocalized batches, mirroring the
/// usual swap-then-measure pattern.
pub fn insert_swaps(
    logical: &Program,
    m: usize,
    k_max: usize,
    policy: &dyn EvictionPolicy,
) -> Result<Program> {
    let l = logical.l();
    if m > l || m == 0 {
        return Err(Error::Config(format!("m = {m} outside 1..={l}")));
    }
    if logical.has_swaps() {
        let idx = logical
            .instructions()
            .iter()
            .position(|i| matches!(i, Instruction::Swap(_)))
            .unwrap();
        return Err(Error::Compile {
            line: logical.source_of(idx).0,
            message: "program already contains swap commands".into(),
        });
    }
    let mut sigma = QubitPermutation::identity(l, m);
    let mut out = Program::from_parts(Vec::new(), Vec::new(), l, logical.declared_ranks());
    compile_body(logical, &mut sigma, k_max, policy, &mut out)?;
    Ok(out)
}

/// Compile one program's body against a live layout, appending to `out`.
/// Callers that split a pipeline into phases thread the same `sigma`
/// through each phase so later fragments see where earlier swaps left the
/// qubits.
pub fn compile_body(
    logical: &Program,
    sigma: &mut QubitPermutation,
    k_max: usize,
    policy: &dyn EvictionPolicy,
    out: &mut Program,
) -> Result<()> {
    let (l, m) = (sigma.l(), sigma.m());
    if k_max == 0 {
        return Err(Error::Config("k_max must be at least 1".into()));
    }
    let k_cap = k_max.min(m).min(l - m).max(1);

    for (idx, inst) in logical.instructions().iter().enumerate() {
        let source = logical.source_of(idx);
        match inst {
            Instruction::Gate(g) => {
                relocalize(out, sigma, &g.qubits(), k_cap, policy, source)?;
                out.push_at(inst.clone(), source)?;
            }
            Instruction::DoMeasurement(qs) => {
                // Measure what is already local, in listed order.
                let local_now: Vec<usize> =
                    qs.iter().copied().filter(|&q| sigma.is_local(q)).collect();
                if !local_now.is_empty() {
                    out.push_at(Instruction::DoMeasurement(local_now), source)?;
                }
                // Then pull in the rest, batch by batch.
                let pending: Vec<usize> =
                    qs.iter().copied().filter(|&q| !sigma.is_local(q)).collect();
                for batch in pending.chunks(k_cap) {
                    relocalize(out, sigma, batch, k_cap, policy, source)?;
                    out.push_at(Instruction::DoMeasurement(batch.to_vec()), source)?;
                }
            }
            other => out.push_at(other.clone(), source)?,
        }
    }
    Ok(())
}

/// Emit the swaps that make all `operands` local, updating `sigma` and
/// pinning the operands so none of them gets evicted along the way.
fn relocalize(
    out: &mut Program,
    sigma: &mut QubitPermutation,
    operands: &[usize],
    k_cap: usize,
    policy: &dyn EvictionPolicy,
    source: (usize, usize),
) -> Result<()> {
    let nonlocal: Vec<usize> = operands
        .iter()
        .copied()
        .filter(|&q| !sigma.is_local(q))
        .collect();
    if nonlocal.is_empty() {
        return Ok(());
    }
    if operands.len() > sigma.m() {
        return Err(Error::Compile {
            line: source.0,
            message: format!(
                "instruction needs {} local qubits but only {} fit a shard",
                operands.len(),
                sigma.m()
            ),
        });
    }
    for batch in nonlocal.chunks(k_cap) {
        let evicted = policy
            .evict(sigma, batch.len(), operands)
            .map_err(|e| Error::Compile {
                line: source.0,
                message: format!("cannot relocalize {batch:?}: {e}"),
            })?;
        let pairs: Vec<(usize, usize)> = evicted
            .iter()
            .map(|&p| sigma.qubit_at(p))
            .zip(batch.iter().copied())
            .collect();
        for &(local_q, nonlocal_q) in &pairs {
            let (pl, pn) = (sigma.position_of(local_q), sigma.position_of(nonlocal_q));
            sigma.transpose_positions(pl, pn);
        }
        out.push_at(Instruction::Swap(pairs), source)?;
    }
    Ok(())
}

/// Ready a program for execution at shard size `2^m`: programs that already
/// contain swap commands are only validated, swap-free ones are compiled
/// first.
pub fn prepare(
    program: &Program,
    m: usize,
    k_max: usize,
    policy: &dyn EvictionPolicy,
) -> Result<Program> {
    let prepared = if program.has_swaps() {
        program.clone()
    } else {
        insert_swaps(program, m, k_max, policy)?
    };
    validate_locality(&prepared, m)?;
    Ok(prepared)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{parse_program, GateOp};
    use crate::layout::EvictLowestPositions;

    fn all_h_program(l: usize) -> Program {
        let mut p = Program::new(l).unwrap();
        for q in 0..l {
            p.gate(GateOp::H(q)).unwrap();
        }
        p
    }

    #[test]
    fn local_programs_pass_through_unchanged() {
        let p = all_h_program(6);
        let compiled = insert_swaps(&p, 6, 1, &EvictLowestPositions).unwrap();
        assert_eq!(compiled, p);
        let compiled = insert_swaps(&p, 6, 3, &EvictLowestPositions).unwrap();
        assert_eq!(compiled, p);
    }

    #[test]
    fn one_nonlocal_gate_gets_one_single_pair_swap() {
        let mut p = Program::new(6).unwrap();
        p.gate(GateOp::H(5)).unwrap();
        let compiled = insert_swaps(&p, 4, 3, &EvictLowestPositions).unwrap();
        let swaps: Vec<_> = compiled
            .instructions()
            .iter()
            .filter_map(|i| match i {
                Instruction::Swap(pairs) => Some(pairs.clone()),
                _ => None,
            })
            .collect();
        assert_eq!(swaps, vec![vec![(0, 5)]]);
        validate_locality(&compiled, 4).unwrap();
    }

    #[test]
    fn hadamard_sweep_compiles_to_the_rolling_swap_chain() {
        let p = all_h_program(8);
        let compiled = insert_swaps(&p, 6, 1, &EvictLowestPositions).unwrap();
        let text = compiled.serialize();
        assert!(text.contains("SWAP 1 0 6\nH 6\nSWAP 1 6 7\nH 7"), "{text}");
        validate_locality(&compiled, 6).unwrap();
    }

    #[test]
    fn measurement_splits_local_first_then_batches() {
        let mut p = all_h_program(8);
        p.push(Instruction::BeginMeasurement).unwrap();
        p.push(Instruction::DoMeasurement((0..8).collect())).unwrap();
        p.push(Instruction::EndMeasurement).unwrap();
        let compiled = insert_swaps(&p, 6, 2, &EvictLowestPositions).unwrap();
        validate_locality(&compiled, 6).unwrap();
        // After the H sweep the layout holds qubit 7 at position 0; the
        // measurement list 0..8 splits into the local part and one batch of
        // the two nonlocal qubits.
        let text = compiled.serialize();
        assert!(
            text.contains("DO MEASUREMENT 1 2 3 4 5 7\nSWAP 2 7 1 0 6\nDO MEASUREMENT 0 6"),
            "{text}"
        );
    }

    #[test]
    fn multiqubit_gate_localized_in_one_swap_when_k_allows() {
        let mut p = Program::new(8).unwrap();
        p.gate(GateOp::Toffoli {
            control1: 5,
            control2: 6,
            target: 7,
        })
        .unwrap();
        let compiled = insert_swaps(&p, 4, 3, &EvictLowestPositions).unwrap();
        let swap_sizes: Vec<usize> = compiled
            .instructions()
            .iter()
            .filter_map(|i| match i {
                Instruction::Swap(pairs) => Some(pairs.len()),
                _ => None,
            })
            .collect();
        assert_eq!(swap_sizes, vec![3]);
        validate_locality(&compiled, 4).unwrap();

        // With k_max = 1 the same gate needs three consecutive swaps.
        let compiled = insert_swaps(&p, 4, 1, &EvictLowestPositions).unwrap();
        let swap_sizes: Vec<usize> = compiled
            .instructions()
            .iter()
            .filter_map(|i| match i {
                Instruction::Swap(pairs) => Some(pairs.len()),
                _ => None,
            })
            .collect();
        assert_eq!(swap_sizes, vec![1, 1, 1]);
        validate_locality(&compiled, 4).unwrap();
    }

    #[test]
    fn eviction_never_boots_an_operand() {
        // CNOT with a local control at position 0: the eviction must pick a
        // different position for the incoming target.
        let mut p = Program::new(6).unwrap();
        p.gate(GateOp::CNot {
            control: 0,
            target: 5,
        })
        .unwrap();
        let compiled = insert_swaps(&p, 4, 1, &EvictLowestPositions).unwrap();
        let Instruction::Swap(pairs) = &compiled.instructions()[2] else {
            panic!("expected swap before the gate");
        };
        assert_eq!(pairs, &[(1, 5)]);
        validate_locality(&compiled, 4).unwrap();
    }

    #[test]
    fn oversized_gates_are_compile_errors() {
        let mut p = Program::new(6).unwrap();
        p.gate(GateOp::Toffoli {
            control1: 3,
            control2: 4,
            target: 5,
        })
        .unwrap();
        assert!(matches!(
            insert_swaps(&p, 2, 2, &EvictLowestPositions),
            Err(Error::Compile { .. })
        ));
    }

    #[test]
    fn validate_reports_first_violation() {
        let p = parse_program("QUBITS 8\nINITIAL STATE 0\nH 0\nH 7").unwrap();
        let err = validate_locality(&p, 6).unwrap_err();
        assert!(matches!(err, Error::Diagnostic { line: 4, .. }), "{err}");

        let p = parse_program("QUBITS 8\nINITIAL STATE 0\nSWAP 1 0 1").unwrap();
        let err = validate_locality(&p, 6).unwrap_err();
        assert!(matches!(err, Error::Diagnostic { line: 3, .. }), "{err}");

        let p = parse_program("QUBITS 8\nINITIAL STATE 0\nSWAP 1 6 7").unwrap();
        assert!(validate_locality(&p, 6).is_err());
    }

    #[test]
    fn compiled_equals_validated() {
        let mut p = all_h_program(10);
        p.push(Instruction::BeginMeasurement).unwrap();
        p.push(Instruction::DoMeasurement((0..10).collect()))
            .unwrap();
        p.push(Instruction::EndMeasurement).unwrap();
        for m in 1..=10 {
            for k_max in 1..=3 {
                let compiled = insert_swaps(&p, m, k_max, &EvictLowestPositions).unwrap();
                validate_locality(&compiled, m).unwrap();
            }
        }
    }
}
