//! Assertion translation: cutting a program into executable slices.
//!
//! Slice `n` is the program up to assertion `n` followed by the instructions
//! that check that assertion. Every target gets its own single-bit classical
//! register named `test_<label>`, where the label is the source-level qubit
//! name (`q0` for `q[0]`, or a gate formal such as `y`).

use alloc::{
    collections::BTreeSet,
    format,
    string::String,
    vec::Vec,
};
use core::ops::Range;

use thiserror::Error;

use crate::circuit::{
    bit_name, invert_circuit, Assertion, AssertionClass, AssertionKind, CircuitError, Clbit, FlatProgram,
    Instruction, Qubit, Register, Step,
};

/// Distributions with one entry at least this large count as one-hot.
const ONE_HOT_THRESHOLD: f64 = 1.0 - 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TranslationOptions {
    /// Re-apply the preparation circuit after checking a circuit equality, so
    /// execution can continue past the assertion.
    pub reapply: bool,
}

impl Default for TranslationOptions {
    fn default() -> Self {
        TranslationOptions { reapply: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expectation {
    Superposition,
    /// The all-zero outcome with certainty.
    Zero,
    /// Outcome probabilities, first bit most significant.
    Distribution(Vec<f64>),
}

impl Expectation {
    /// Expected outcome probabilities, if the expectation is a distribution.
    pub fn probabilities(&self, num_bits: usize) -> Option<Vec<f64>> {
        match self {
            Expectation::Superposition => None,
            Expectation::Zero => {
                let mut p = alloc::vec![0.0; 1usize << num_bits];
                p[0] = 1.0;
                Some(p)
            }
            Expectation::Distribution(p) => Some(p.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssertionMetadata {
    pub assertion: usize,
    pub kind: AssertionClass,
    /// Classical bit names, first is the most significant outcome bit.
    pub bits: Vec<String>,
    /// Source-level names of the measured qubits, for display.
    pub labels: Vec<String>,
    pub expectation: Expectation,
    /// Measuring the targets leaves a correct state undisturbed.
    pub projective: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Slice {
    /// 1-based position in the slice list.
    pub index: usize,
    pub qregs: Vec<Register>,
    pub cregs: Vec<Register>,
    pub instructions: Vec<Instruction>,
    pub metadata: Vec<AssertionMetadata>,
    pub covered: Vec<usize>,
    /// Execution stops after this slice's last check.
    pub terminal: bool,
    /// Number of program instructions this slice executes.
    pub prefix_len: usize,
    /// Instruction ranges inserted for each metadata entry, in order.
    pub blocks: Vec<Range<usize>>,
}

impl Slice {
    pub fn num_qubits(&self) -> usize {
        self.qregs.iter().map(|r| r.size).sum()
    }

    pub fn num_clbits(&self) -> usize {
        self.cregs.iter().map(|r| r.size).sum()
    }

    pub fn clbit_name(&self, c: Clbit) -> String {
        bit_name(&self.cregs, c.0)
    }

    pub fn clbit_index(&self, name: &str) -> Option<Clbit> {
        (0..self.num_clbits()).map(Clbit).find(|&c| self.clbit_name(c) == name)
    }

    /// All metadata bits in order; the layout of this slice's counts.
    pub fn bit_order(&self) -> Vec<String> {
        self.metadata.iter().flat_map(|m| m.bits.iter().cloned()).collect()
    }

    /// The instructions that come from the program itself, i.e. everything
    /// outside the inserted assertion blocks.
    pub fn program_instructions(&self) -> Vec<&Instruction> {
        self.instructions
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.blocks.iter().any(|b| b.contains(i)))
            .map(|(_, instr)| instr)
            .collect()
    }

    /// Qubits measured by the inserted assertion blocks.
    pub fn measured_qubits(&self) -> BTreeSet<Qubit> {
        self.blocks
            .iter()
            .flat_map(|b| self.instructions[b.clone()].iter())
            .filter_map(|i| match i {
                Instruction::Measure { qubit, .. } => Some(*qubit),
                _ => None,
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum TranslateError {
    #[error("no assertions found")]
    NoAssertions,
    #[error("assertion {id}: {source}")]
    Circuit { id: usize, source: CircuitError },
    #[error("assertion {id}: circuit block uses {block} qubit(s) for {targets} target(s)")]
    BlockSize {
        id: usize,
        block: usize,
        targets: usize,
    },
    #[error("invalid program: {0}")]
    Invalid(String),
}

/// Chooses fresh classical register names for every assertion target, in
/// program order, avoiding every register name already in use.
pub fn fresh_register_names(prog: &FlatProgram) -> Vec<(usize, Vec<String>)> {
    let mut used: BTreeSet<String> = prog
        .qregs
        .iter()
        .chain(&prog.cregs)
        .map(|r| r.name.clone())
        .collect();
    let mut out = Vec::new();
    for a in prog.assertions() {
        let names = a
            .labels
            .iter()
            .map(|label| {
                let base = format!("test_{label}");
                let mut name = base.clone();
                let mut k = 1;
                while used.contains(&name) {
                    name = format!("{base}_{k}");
                    k += 1;
                }
                used.insert(name.clone());
                name
            })
            .collect();
        out.push((a.id, names));
    }
    out
}

/// Translates one assertion. `regs` are the fresh register names (one per
/// target) and `first_clbit` the index of the first of them.
pub fn translate_assertion(
    a: &Assertion,
    regs: &[String],
    first_clbit: usize,
    opts: &TranslationOptions,
) -> Result<(Vec<Instruction>, AssertionMetadata), TranslateError> {
    assert!(!a.targets.is_empty(), "assertion {} has no targets", a.id);
    assert_eq!(regs.len(), a.targets.len());
    let measurements = a
        .targets
        .iter()
        .enumerate()
        .map(|(j, &q)| Instruction::measure(q, Clbit(first_clbit + j)));
    let bits: Vec<String> = regs.iter().map(|r| format!("{r}[0]")).collect();

    let (instrs, expectation, projective) = match &a.kind {
        AssertionKind::Superposition => (measurements.collect(), Expectation::Superposition, false),
        AssertionKind::EqualityState(amps) => {
            let total: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
            let probs: Vec<f64> = amps.iter().map(|z| z.norm_sqr() / total).collect();
            let one_hot = probs.iter().any(|&p| p >= ONE_HOT_THRESHOLD);
            (measurements.collect(), Expectation::Distribution(probs), one_hot)
        }
        AssertionKind::EqualityCircuit { body, num_qubits } => {
            if *num_qubits != a.targets.len() {
                return Err(TranslateError::BlockSize {
                    id: a.id,
                    block: *num_qubits,
                    targets: a.targets.len(),
                });
            }
            let to_target = |q: Qubit| a.targets[q.0];
            let inverse = invert_circuit(body).map_err(|source| TranslateError::Circuit { id: a.id, source })?;
            let mut out: Vec<Instruction> = inverse.iter().map(|i| i.map_qubits(to_target)).collect();
            out.extend(measurements);
            if opts.reapply {
                out.extend(body.iter().map(|i| i.map_qubits(to_target)));
            }
            (out, Expectation::Zero, opts.reapply)
        }
    };
    let meta = AssertionMetadata {
        assertion: a.id,
        kind: a.class(),
        bits,
        labels: a.labels.clone(),
        expectation,
        projective,
    };
    Ok((instrs, meta))
}

/// One independent slice per assertion, in program order.
pub fn build_slices(prog: &FlatProgram, opts: &TranslationOptions) -> Result<Vec<Slice>, TranslateError> {
    prog.validate().map_err(TranslateError::Invalid)?;
    let names = fresh_register_names(prog);
    if names.is_empty() {
        return Err(TranslateError::NoAssertions);
    }
    let user_clbits = prog.num_clbits();
    let mut prefix: Vec<Instruction> = Vec::new();
    let mut slices = Vec::new();
    let mut next = names.iter();
    for step in &prog.steps {
        match step {
            Step::Instruction(i) => prefix.push(i.clone()),
            Step::Assertion(a) => {
                let (_, regs) = next.next().expect("one name list per assertion");
                let (block, meta) = translate_assertion(a, regs, user_clbits, opts)?;
                let mut cregs = prog.cregs.clone();
                cregs.extend(regs.iter().map(|r| Register::new(r.clone(), 1)));
                let mut instructions = prefix.clone();
                let start = instructions.len();
                instructions.extend(block);
                let end = instructions.len();
                slices.push(Slice {
                    index: slices.len() + 1,
                    qregs: prog.qregs.clone(),
                    cregs,
                    instructions,
                    metadata: alloc::vec![meta],
                    covered: alloc::vec![a.id],
                    terminal: matches!(a.kind, AssertionKind::EqualityCircuit { .. }) && !opts.reapply,
                    prefix_len: prefix.len(),
                    blocks: alloc::vec![start..end],
                });
            }
        }
    }
    Ok(slices)
}
