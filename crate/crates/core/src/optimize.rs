//! Slice reduction: assertion movement, subset canceling and concatenation.

use alloc::{vec, vec::Vec};

use num_complex::Complex64;
use thiserror::Error;

use crate::circuit::{Assertion, AssertionKind, FlatProgram, Instruction, Qubit, Register, Step};
use crate::sim::{self, SimError};
use crate::translate::{build_slices, Slice, TranslateError, TranslationOptions};

/// Implication checks materialize states over at most this many qubits.
pub const MAX_IMPLICATION_QUBITS: usize = 16;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OptimizationOptions {
    pub cancel: bool,
    pub concat: bool,
    pub move_assertions: bool,
}

impl Default for OptimizationOptions {
    fn default() -> Self {
        OptimizationOptions {
            cancel: true,
            concat: true,
            move_assertions: true,
        }
    }
}

impl OptimizationOptions {
    pub fn none() -> Self {
        OptimizationOptions {
            cancel: false,
            concat: false,
            move_assertions: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImplicationRule {
    SupSup,
    EqSup,
    EqEq,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ImplicationVerdict {
    pub implies: bool,
    pub rule: ImplicationRule,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum OptimizeError {
    #[error("assertion {id} spans {qubits} qubits; implication checks are limited to {MAX_IMPLICATION_QUBITS}")]
    TooWide { id: usize, qubits: usize },
    #[error("assertion {id}: {source}")]
    Simulation { id: usize, source: SimError },
    #[error(transparent)]
    Translate(#[from] TranslateError),
}

/// True iff the instruction touches none of the assertion's targets.
pub fn commutes(a: &Assertion, instr: &Instruction) -> bool {
    !a.targets_overlap(&instr.acted_qubits())
}

/// Hoists each assertion to the left over every instruction it commutes
/// with. Assertions never pass each other.
pub fn move_assertions(prog: &FlatProgram) -> FlatProgram {
    let mut steps: Vec<Step> = Vec::with_capacity(prog.steps.len());
    for step in &prog.steps {
        match step {
            Step::Assertion(a) => {
                let mut at = steps.len();
                while at > 0 {
                    match &steps[at - 1] {
                        Step::Instruction(i) if commutes(a, i) => at -= 1,
                        _ => break,
                    }
                }
                steps.insert(at, step.clone());
            }
            Step::Instruction(_) => steps.push(step.clone()),
        }
    }
    FlatProgram {
        qregs: prog.qregs.clone(),
        cregs: prog.cregs.clone(),
        steps,
    }
}

/// State named by an equality assertion, with the first target as the most
/// significant index bit.
fn asserted_state(a: &Assertion) -> Result<Option<Vec<Complex64>>, OptimizeError> {
    let n = a.targets.len();
    match &a.kind {
        AssertionKind::Superposition => Ok(None),
        _ if n > MAX_IMPLICATION_QUBITS => Err(OptimizeError::TooWide { id: a.id, qubits: n }),
        AssertionKind::EqualityState(amps) => {
            let norm = libm::sqrt(amps.iter().map(|z| z.norm_sqr()).sum::<f64>());
            Ok(Some(amps.iter().map(|z| z / norm).collect()))
        }
        AssertionKind::EqualityCircuit { body, num_qubits } => {
            let wrap = |source| OptimizeError::Simulation { id: a.id, source };
            let state = sim::simulate(body, *num_qubits).map_err(wrap)?;
            let order: Vec<Qubit> = (0..*num_qubits).map(Qubit).collect();
            Ok(Some(state.amplitudes_in_order(&order).map_err(wrap)?))
        }
    }
}

/// Probability of each outcome of the target positions `keep` of an
/// `n`-qubit state indexed most significant first.
fn marginal_by_position(state: &[Complex64], n: usize, keep: &[usize]) -> Vec<f64> {
    let m = keep.len();
    let mut out = vec![0.0; 1usize << m];
    for (i, a) in state.iter().enumerate() {
        let mut o = 0usize;
        for (j, &pos) in keep.iter().enumerate() {
            let bit = (i >> (n - 1 - pos)) & 1;
            o |= bit << (m - 1 - j);
        }
        out[o] += a.norm_sqr();
    }
    out
}

/// Whether `psi` (over `n` qubits, MSB first) factors as `phi` on the
/// positions `sub` (in that order) times anything on the rest.
fn factors_as(psi: &[Complex64], n: usize, sub: &[usize], phi: &[Complex64], tol: f64) -> bool {
    let rest: Vec<usize> = (0..n).filter(|p| !sub.contains(p)).collect();
    let rows = 1usize << sub.len();
    let cols = 1usize << rest.len();
    // m[r][c] = amplitude with the `sub` bits equal to r and the rest equal to c.
    let mut m = vec![Complex64::new(0.0, 0.0); rows * cols];
    for (i, a) in psi.iter().enumerate() {
        let pick = |positions: &[usize]| {
            let k = positions.len();
            positions
                .iter()
                .enumerate()
                .fold(0usize, |acc, (j, &p)| acc | (((i >> (n - 1 - p)) & 1) << (k - 1 - j)))
        };
        m[pick(sub) * cols + pick(&rest)] = *a;
    }
    let col_norm = |c: usize| (0..rows).map(|r| m[r * cols + c].norm_sqr()).sum::<f64>();
    let best = (0..cols)
        .max_by(|&a, &b| col_norm(a).partial_cmp(&col_norm(b)).unwrap_or(core::cmp::Ordering::Equal))
        .unwrap_or(0);
    let norm = libm::sqrt(col_norm(best));
    if norm <= tol {
        return false;
    }
    let u: Vec<Complex64> = (0..rows).map(|r| m[r * cols + best] / norm).collect();
    // Residual of projecting every column onto u.
    let mut residual = 0.0;
    for c in 0..cols {
        let coeff: Complex64 = (0..rows).map(|r| u[r].conj() * m[r * cols + c]).sum();
        for r in 0..rows {
            residual += (m[r * cols + c] - u[r] * coeff).norm_sqr();
        }
    }
    if libm::sqrt(residual) > tol {
        return false;
    }
    let phi_norm = libm::sqrt(phi.iter().map(|z| z.norm_sqr()).sum::<f64>());
    let overlap: Complex64 = u.iter().zip(phi).map(|(a, b)| b.conj() * a).sum::<Complex64>() / phi_norm;
    let size = overlap.norm();
    if size <= tol {
        return false;
    }
    let phase = overlap / size;
    u.iter()
        .zip(phi)
        .all(|(a, b)| (a - phase * (b / phi_norm)).norm() <= tol.max(64.0 * f64::EPSILON))
}

/// Decides whether `a1` holding guarantees that `a2` holds for the same
/// state.
pub fn implies(a1: &Assertion, a2: &Assertion, tol: f64) -> Result<ImplicationVerdict, OptimizeError> {
    let verdict = |implies, rule| Ok(ImplicationVerdict { implies, rule });
    let psi1 = asserted_state(a1)?;
    match (&psi1, &a2.kind) {
        (None, AssertionKind::Superposition) => {
            let subset = a1.targets.iter().all(|q| a2.targets.contains(q));
            verdict(subset, ImplicationRule::SupSup)
        }
        (None, _) => verdict(false, ImplicationRule::None),
        (Some(psi), AssertionKind::Superposition) => {
            let keep: Vec<usize> = (0..a1.targets.len())
                .filter(|&p| a2.targets.contains(&a1.targets[p]))
                .collect();
            if keep.is_empty() {
                return verdict(false, ImplicationRule::EqSup);
            }
            let marginal = marginal_by_position(psi, a1.targets.len(), &keep);
            let support = marginal.iter().filter(|&&p| p > tol).count();
            verdict(support >= 2, ImplicationRule::EqSup)
        }
        (Some(psi), _) => {
            let sub: Option<Vec<usize>> = a2
                .targets
                .iter()
                .map(|q| a1.targets.iter().position(|t| t == q))
                .collect();
            let Some(sub) = sub else {
                return verdict(false, ImplicationRule::EqEq);
            };
            let phi = asserted_state(a2)?.expect("equality assertion has a state");
            verdict(factors_as(psi, a1.targets.len(), &sub, &phi, tol), ImplicationRule::EqEq)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cancellation {
    pub canceled: usize,
    pub implied_by: usize,
}

/// Removes every assertion implied by the assertion directly before it.
/// After a removal the survivor is compared with the next assertion, so
/// chains cancel left to right.
pub fn cancel_subsets(prog: &FlatProgram) -> Result<(FlatProgram, Vec<Cancellation>), OptimizeError> {
    let mut steps: Vec<Step> = Vec::with_capacity(prog.steps.len());
    let mut canceled = Vec::new();
    for step in &prog.steps {
        if let (Step::Assertion(a2), Some(Step::Assertion(a1))) = (step, steps.last()) {
            if implies(a1, a2, DEFAULT_TOLERANCE)?.implies {
                canceled.push(Cancellation {
                    canceled: a2.id,
                    implied_by: a1.id,
                });
                continue;
            }
        }
        steps.push(step.clone());
    }
    let out = FlatProgram {
        qregs: prog.qregs.clone(),
        cregs: prog.cregs.clone(),
        steps,
    };
    Ok((out, canceled))
}

/// Whether `later` can run in the same execution as `earlier`, with
/// `between` the program instructions separating their prefixes.
pub fn can_concatenate(earlier: &Slice, later: &Slice, between: &[Instruction]) -> bool {
    if earlier.terminal {
        return false;
    }
    if earlier.metadata.iter().all(|m| m.projective) {
        return true;
    }
    let measured = earlier.measured_qubits();
    let later_blocks = later.blocks.iter().flat_map(|b| later.instructions[b.clone()].iter());
    !between
        .iter()
        .chain(later_blocks)
        .any(|i| i.acted_qubits().targets.iter().any(|q| measured.contains(q)))
}

/// Appends `later`'s check blocks to `earlier`, running `between` first.
pub fn merge_slices(earlier: &Slice, later: &Slice, between: &[Instruction]) -> Slice {
    let user_clbits = later.num_clbits() - later.metadata.iter().map(|m| m.bits.len()).sum::<usize>();
    let shift = earlier.num_clbits() - user_clbits;
    let mut instructions = earlier.instructions.clone();
    instructions.extend(between.iter().cloned());
    let mut blocks = earlier.blocks.clone();
    for b in &later.blocks {
        let start = instructions.len();
        instructions.extend(later.instructions[b.clone()].iter().map(|i| match i {
            Instruction::Measure { clbit, .. } if clbit.0 >= user_clbits => i.shift_clbits(shift),
            other => other.clone(),
        }));
        blocks.push(start..instructions.len());
    }
    let mut cregs: Vec<Register> = earlier.cregs.clone();
    cregs.extend(later.cregs[later.cregs.len() - later.metadata.iter().map(|m| m.bits.len()).sum::<usize>()..].iter().cloned());
    let mut metadata = earlier.metadata.clone();
    metadata.extend(later.metadata.iter().cloned());
    let mut covered = earlier.covered.clone();
    covered.extend(later.covered.iter().copied());
    Slice {
        index: earlier.index,
        qregs: earlier.qregs.clone(),
        cregs,
        instructions,
        metadata,
        covered,
        terminal: later.terminal,
        prefix_len: later.prefix_len,
        blocks,
    }
}

/// Greedy left-to-right concatenation of slices built from `prog`.
pub fn concatenate(prog: &FlatProgram, slices: Vec<Slice>) -> Vec<Slice> {
    let program: Vec<Instruction> = prog.instructions().cloned().collect();
    let mut out: Vec<Slice> = Vec::new();
    for s in slices {
        if let Some(current) = out.last_mut() {
            let between = &program[current.prefix_len..s.prefix_len];
            if can_concatenate(current, &s, between) {
                *current = merge_slices(current, &s, between);
                continue;
            }
        }
        out.push(s);
    }
    for (i, s) in out.iter_mut().enumerate() {
        s.index = i + 1;
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimized {
    /// The program after movement and canceling; slices refer to it.
    pub program: FlatProgram,
    pub slices: Vec<Slice>,
    pub cancellations: Vec<Cancellation>,
}

/// Runs movement, canceling and concatenation as enabled, then slices the
/// resulting program.
pub fn optimize(
    prog: &FlatProgram,
    topts: &TranslationOptions,
    opts: &OptimizationOptions,
) -> Result<Optimized, OptimizeError> {
    let moved = if opts.move_assertions {
        move_assertions(prog)
    } else {
        prog.clone()
    };
    let (program, cancellations) = if opts.cancel {
        cancel_subsets(&moved)?
    } else {
        (moved, Vec::new())
    };
    let mut slices = build_slices(&program, topts)?;
    if opts.concat {
        slices = concatenate(&program, slices);
    }
    Ok(Optimized {
        program,
        slices,
        cancellations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;
    use crate::qasm::parse_flat;
    use core::f64::consts::FRAC_1_SQRT_2;

    fn sup(id: usize, qs: &[usize]) -> Assertion {
        Assertion {
            id,
            targets: qs.iter().map(|&q| Qubit(q)).collect(),
            labels: qs.iter().map(|q| alloc::format!("q{q}")).collect(),
            kind: AssertionKind::Superposition,
        }
    }

    fn eq(id: usize, qs: &[usize], amps: &[(f64, f64)]) -> Assertion {
        Assertion {
            kind: AssertionKind::EqualityState(amps.iter().map(|&(r, i)| Complex64::new(r, i)).collect()),
            ..sup(id, qs)
        }
    }

    fn g(gate: Gate, qs: &[usize]) -> Instruction {
        Instruction::gate(gate, qs.iter().map(|&q| Qubit(q)).collect()).unwrap()
    }

    #[test]
    fn commutation_is_disjoint_support() {
        let a = eq(1, &[0], &[(1.0, 0.0), (0.0, 0.0)]);
        assert!(commutes(&a, &g(Gate::X, &[1])));
        assert!(!commutes(&sup(1, &[2]), &g(Gate::Cx, &[1, 2])));
        assert!(!commutes(&sup(1, &[1]), &g(Gate::Cx, &[1, 2])));
        assert!(commutes(&a, &Instruction::Barrier { qubits: vec![Qubit(0)] }));
    }

    #[test]
    fn table_cases() {
        let h = FRAC_1_SQRT_2;
        let r = implies(&sup(1, &[0]), &sup(2, &[0, 1]), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(r, ImplicationVerdict { implies: true, rule: ImplicationRule::SupSup });
        let r = implies(&eq(1, &[0], &[(h, 0.0), (h, 0.0)]), &sup(2, &[0]), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(r, ImplicationVerdict { implies: true, rule: ImplicationRule::EqSup });
        // q0 = |0>, q1 = |1>: index 0b01
        let joint = eq(1, &[0, 1], &[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        let r = implies(&joint, &eq(2, &[0], &[(1.0, 0.0), (0.0, 0.0)]), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(r, ImplicationVerdict { implies: true, rule: ImplicationRule::EqEq });
        let r = implies(&eq(1, &[0], &[(0.0, 0.0), (1.0, 0.0)]), &sup(2, &[0, 1]), DEFAULT_TOLERANCE).unwrap();
        assert!(!r.implies);
    }

    #[test]
    fn sup_never_implies_eq() {
        let r = implies(&sup(1, &[0]), &eq(2, &[0], &[(1.0, 0.0), (0.0, 0.0)]), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(r, ImplicationVerdict { implies: false, rule: ImplicationRule::None });
    }

    #[test]
    fn entangled_state_does_not_factor() {
        let h = FRAC_1_SQRT_2;
        let bell = eq(1, &[0, 1], &[(h, 0.0), (0.0, 0.0), (0.0, 0.0), (h, 0.0)]);
        let plus = eq(2, &[0], &[(h, 0.0), (h, 0.0)]);
        assert!(!implies(&bell, &plus, DEFAULT_TOLERANCE).unwrap().implies);
        // but each half of a Bell pair is in superposition
        assert!(implies(&bell, &sup(2, &[1]), DEFAULT_TOLERANCE).unwrap().implies);
    }

    #[test]
    fn eq_eq_respects_target_order_and_phase() {
        // q0 = |0>, q1 = |1>, asserted as (q1, q0) = |10> with a global phase
        let joint = eq(1, &[0, 1], &[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        let swapped = eq(2, &[1, 0], &[(0.0, 0.0), (0.0, 0.0), (0.0, -1.0), (0.0, 0.0)]);
        assert!(implies(&joint, &swapped, DEFAULT_TOLERANCE).unwrap().implies);
        let wrong = eq(2, &[1, 0], &[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        assert!(!implies(&joint, &wrong, DEFAULT_TOLERANCE).unwrap().implies);
    }

    #[test]
    fn circuit_assertions_use_the_block_state() {
        let p = parse_flat("qreg q[1]; assert-eq q { qreg t[1]; h t[0]; } assert-sup q;").unwrap();
        let a: Vec<&Assertion> = p.assertions().collect();
        assert!(implies(a[0], a[1], DEFAULT_TOLERANCE).unwrap().implies);
    }

    #[test]
    fn movement_and_canceling() {
        let p = parse_flat("qreg q[2]; assert-eq q[0] = |0>; x q[1]; assert-eq q[0] = |0>;").unwrap();
        let moved = move_assertions(&p);
        assert!(matches!(moved.steps[0], Step::Assertion(_)));
        assert!(matches!(moved.steps[1], Step::Assertion(_)));
        assert_eq!(move_assertions(&moved), moved);
        let (out, canceled) = cancel_subsets(&moved).unwrap();
        assert_eq!(canceled, vec![Cancellation { canceled: 2, implied_by: 1 }]);
        assert_eq!(out.assertions().count(), 1);
    }

    #[test]
    fn canceling_direction() {
        let p = parse_flat("qreg q[2]; h q; assert-sup q[0]; assert-sup q[0], q[1];").unwrap();
        assert_eq!(cancel_subsets(&p).unwrap().1.len(), 1);
        let p = parse_flat("qreg q[2]; h q; assert-sup q[0], q[1]; assert-sup q[0];").unwrap();
        assert!(cancel_subsets(&p).unwrap().1.is_empty());
    }

    #[test]
    fn controls_do_not_block_concatenation() {
        let src = "qreg q[3]; h q[0]; h q[1]; assert-sup q[0], q[1]; cx q[1], q[2]; assert-sup q[2];";
        let p = parse_flat(src).unwrap();
        let out = optimize(&p, &TranslationOptions::default(), &OptimizationOptions::default()).unwrap();
        assert_eq!(out.slices.len(), 1);
        let s = &out.slices[0];
        assert_eq!(s.covered, vec![1, 2]);
        assert_eq!(s.bit_order(), vec!["test_q0[0]", "test_q1[0]", "test_q2[0]"]);
        assert_eq!(s.instructions.len(), 6);
        assert_eq!(s.instructions[4], g(Gate::Cx, &[1, 2]));
    }

    #[test]
    fn targets_block_concatenation() {
        let p = parse_flat("qreg q[1]; h q[0]; assert-sup q[0]; h q[0]; assert-sup q[0];").unwrap();
        let out = optimize(&p, &TranslationOptions::default(), &OptimizationOptions::default()).unwrap();
        assert_eq!(out.slices.len(), 2);
    }

    #[test]
    fn terminal_slices_do_not_merge() {
        let src = "qreg q[2]; assert-eq q[0] { qreg t[1]; } x q[1]; assert-eq q[1] = |1>;";
        let p = parse_flat(src).unwrap();
        let merged = optimize(&p, &TranslationOptions::default(), &OptimizationOptions::default()).unwrap();
        assert_eq!(merged.slices.len(), 1);
        let split = optimize(&p, &TranslationOptions { reapply: false }, &OptimizationOptions::default()).unwrap();
        assert_eq!(split.slices.len(), 2);
    }

    #[test]
    fn single_slice_unchanged() {
        let p = parse_flat("qreg q[1]; h q[0]; assert-sup q[0];").unwrap();
        let base = build_slices(&p, &TranslationOptions::default()).unwrap();
        let out = optimize(&p, &TranslationOptions::default(), &OptimizationOptions::default()).unwrap();
        assert_eq!(out.slices, base);
    }
}
