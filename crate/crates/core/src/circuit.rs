//! Circuit IR: qubits, instructions, assertions and the flat program.

use alloc::{
    format,
    string::{String, ToString},
    vec::Vec,
};
use core::fmt;

use num_complex::Complex64;
use thiserror::Error;

/// Global qubit index into the flattened quantum registers of a program.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Qubit(pub usize);

/// Global classical bit index into the flattened classical registers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Clbit(pub usize);

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CircuitError {
    #[error("measurement is not unitary and cannot be inverted")]
    NonUnitary,
    #[error("gate `{name}` expects {expected} qubit operand(s), got {got}")]
    Arity {
        name: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("qubit {0} appears more than once in one instruction")]
    DuplicateOperand(usize),
}

/// How a gate is inverted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InverseRule {
    SelfInverse,
    Named(&'static str),
    NegateAngle,
}

/// Static description of a supported gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GateInfo {
    pub name: &'static str,
    pub num_qubits: usize,
    pub num_params: usize,
    /// The first `num_controls` operands are controls, the rest are targets.
    pub num_controls: usize,
    pub inverse: InverseRule,
}

const fn info(
    name: &'static str,
    num_qubits: usize,
    num_params: usize,
    num_controls: usize,
    inverse: InverseRule,
) -> GateInfo {
    GateInfo {
        name,
        num_qubits,
        num_params,
        num_controls,
        inverse,
    }
}

/// The supported gate set.
pub const GATE_SET: [GateInfo; 16] = [
    info("x", 1, 0, 0, InverseRule::SelfInverse),
    info("y", 1, 0, 0, InverseRule::SelfInverse),
    info("z", 1, 0, 0, InverseRule::SelfInverse),
    info("h", 1, 0, 0, InverseRule::SelfInverse),
    info("s", 1, 0, 0, InverseRule::Named("sdg")),
    info("sdg", 1, 0, 0, InverseRule::Named("s")),
    info("t", 1, 0, 0, InverseRule::Named("tdg")),
    info("tdg", 1, 0, 0, InverseRule::Named("t")),
    info("rx", 1, 1, 0, InverseRule::NegateAngle),
    info("ry", 1, 1, 0, InverseRule::NegateAngle),
    info("rz", 1, 1, 0, InverseRule::NegateAngle),
    info("p", 1, 1, 0, InverseRule::NegateAngle),
    info("cx", 2, 0, 1, InverseRule::SelfInverse),
    // cz is symmetric; the first operand is classified as control.
    info("cz", 2, 0, 1, InverseRule::SelfInverse),
    info("swap", 2, 0, 0, InverseRule::SelfInverse),
    info("ccx", 3, 0, 2, InverseRule::SelfInverse),
];

pub fn gate_info(name: &str) -> Option<&'static GateInfo> {
    GATE_SET.iter().find(|g| g.name == name)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    X,
    Y,
    Z,
    H,
    S,
    Sdg,
    T,
    Tdg,
    Rx(f64),
    Ry(f64),
    Rz(f64),
    P(f64),
    Cx,
    Cz,
    Swap,
    Ccx,
}

impl Gate {
    /// Builds a gate from its QASM name and evaluated angle parameters.
    pub fn from_name(name: &str, params: &[f64]) -> Option<Gate> {
        let info = gate_info(name)?;
        if info.num_params != params.len() {
            return None;
        }
        Some(match name {
            "x" => Gate::X,
            "y" => Gate::Y,
            "z" => Gate::Z,
            "h" => Gate::H,
            "s" => Gate::S,
            "sdg" => Gate::Sdg,
            "t" => Gate::T,
            "tdg" => Gate::Tdg,
            "rx" => Gate::Rx(params[0]),
            "ry" => Gate::Ry(params[0]),
            "rz" => Gate::Rz(params[0]),
            "p" => Gate::P(params[0]),
            "cx" => Gate::Cx,
            "cz" => Gate::Cz,
            "swap" => Gate::Swap,
            "ccx" => Gate::Ccx,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Gate::X => "x",
            Gate::Y => "y",
            Gate::Z => "z",
            Gate::H => "h",
            Gate::S => "s",
            Gate::Sdg => "sdg",
            Gate::T => "t",
            Gate::Tdg => "tdg",
            Gate::Rx(_) => "rx",
            Gate::Ry(_) => "ry",
            Gate::Rz(_) => "rz",
            Gate::P(_) => "p",
            Gate::Cx => "cx",
            Gate::Cz => "cz",
            Gate::Swap => "swap",
            Gate::Ccx => "ccx",
        }
    }

    pub fn info(&self) -> &'static GateInfo {
        // Every variant has an entry in GATE_SET.
        gate_info(self.name()).expect("gate table covers every variant")
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Rx(a) | Gate::Ry(a) | Gate::Rz(a) | Gate::P(a) => Some(a),
            _ => None,
        }
    }

    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::S => Gate::Sdg,
            Gate::Sdg => Gate::S,
            Gate::T => Gate::Tdg,
            Gate::Tdg => Gate::T,
            Gate::Rx(a) => Gate::Rx(-a),
            Gate::Ry(a) => Gate::Ry(-a),
            Gate::Rz(a) => Gate::Rz(-a),
            Gate::P(a) => Gate::P(-a),
            g => g,
        }
    }
}

/// Operands of an instruction split by role.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ActedQubits {
    pub controls: Vec<Qubit>,
    pub targets: Vec<Qubit>,
}

impl ActedQubits {
    pub fn contains(&self, q: Qubit) -> bool {
        self.controls.contains(&q) || self.targets.contains(&q)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Instruction {
    Gate { gate: Gate, qubits: Vec<Qubit> },
    Measure { qubit: Qubit, clbit: Clbit },
    Barrier { qubits: Vec<Qubit> },
}

impl Instruction {
    /// Checked constructor for a gate application.
    pub fn gate(gate: Gate, qubits: Vec<Qubit>) -> Result<Self, CircuitError> {
        let info = gate.info();
        if qubits.len() != info.num_qubits {
            return Err(CircuitError::Arity {
                name: info.name,
                expected: info.num_qubits,
                got: qubits.len(),
            });
        }
        for (i, q) in qubits.iter().enumerate() {
            if qubits[..i].contains(q) {
                return Err(CircuitError::DuplicateOperand(q.0));
            }
        }
        Ok(Instruction::Gate { gate, qubits })
    }

    pub fn measure(qubit: Qubit, clbit: Clbit) -> Self {
        Instruction::Measure { qubit, clbit }
    }

    pub fn qubits(&self) -> &[Qubit] {
        match self {
            Instruction::Gate { qubits, .. } | Instruction::Barrier { qubits } => qubits,
            Instruction::Measure { qubit, .. } => core::slice::from_ref(qubit),
        }
    }

    pub fn is_measurement(&self) -> bool {
        matches!(self, Instruction::Measure { .. })
    }

    /// Splits the operands into controls and targets. A measurement's qubit is
    /// a target; barriers act on nothing.
    pub fn acted_qubits(&self) -> ActedQubits {
        match self {
            Instruction::Gate { gate, qubits } => {
                let split = gate.info().num_controls;
                ActedQubits {
                    controls: qubits[..split].to_vec(),
                    targets: qubits[split..].to_vec(),
                }
            }
            Instruction::Measure { qubit, .. } => ActedQubits {
                controls: Vec::new(),
                targets: alloc::vec![*qubit],
            },
            Instruction::Barrier { .. } => ActedQubits::default(),
        }
    }

    pub fn inverse(&self) -> Result<Instruction, CircuitError> {
        match self {
            Instruction::Gate { gate, qubits } => Ok(Instruction::Gate {
                gate: gate.inverse(),
                qubits: qubits.clone(),
            }),
            Instruction::Barrier { .. } => Ok(self.clone()),
            Instruction::Measure { .. } => Err(CircuitError::NonUnitary),
        }
    }

    pub fn map_qubits(&self, mut f: impl FnMut(Qubit) -> Qubit) -> Instruction {
        match self {
            Instruction::Gate { gate, qubits } => Instruction::Gate {
                gate: *gate,
                qubits: qubits.iter().map(|&q| f(q)).collect(),
            },
            Instruction::Measure { qubit, clbit } => Instruction::Measure {
                qubit: f(*qubit),
                clbit: *clbit,
            },
            Instruction::Barrier { qubits } => Instruction::Barrier {
                qubits: qubits.iter().map(|&q| f(q)).collect(),
            },
        }
    }

    pub(crate) fn shift_clbits(&self, offset: usize) -> Instruction {
        match self {
            Instruction::Measure { qubit, clbit } => Instruction::Measure {
                qubit: *qubit,
                clbit: Clbit(clbit.0 + offset),
            },
            other => other.clone(),
        }
    }
}

/// Reverses a unitary instruction sequence and inverts each element.
pub fn invert_circuit(body: &[Instruction]) -> Result<Vec<Instruction>, CircuitError> {
    body.iter().rev().map(Instruction::inverse).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum AssertionClass {
    Superposition,
    EqualityState,
    EqualityCircuit,
}

impl AssertionClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            AssertionClass::Superposition => "superposition",
            AssertionClass::EqualityState => "equality-state",
            AssertionClass::EqualityCircuit => "equality-circuit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "superposition" => Some(AssertionClass::Superposition),
            "equality-state" => Some(AssertionClass::EqualityState),
            "equality-circuit" => Some(AssertionClass::EqualityCircuit),
            _ => None,
        }
    }
}

impl fmt::Display for AssertionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AssertionKind {
    Superposition,
    /// Amplitudes indexed with the first target as the most significant bit.
    EqualityState(Vec<Complex64>),
    /// Preparation circuit over block-local qubits `0..num_qubits`; local
    /// qubit `j` stands for target `j`.
    EqualityCircuit {
        body: Vec<Instruction>,
        num_qubits: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assertion {
    pub id: usize,
    pub targets: Vec<Qubit>,
    /// Source-level name of each target (`q0`, `anc0`, or a gate formal such
    /// as `y`). Used to name the classical bits that record the outcomes.
    pub labels: Vec<String>,
    pub kind: AssertionKind,
}

impl Assertion {
    pub fn class(&self) -> AssertionClass {
        match self.kind {
            AssertionKind::Superposition => AssertionClass::Superposition,
            AssertionKind::EqualityState(_) => AssertionClass::EqualityState,
            AssertionKind::EqualityCircuit { .. } => AssertionClass::EqualityCircuit,
        }
    }

    pub fn targets_overlap(&self, acted: &ActedQubits) -> bool {
        self.targets.iter().any(|&q| acted.contains(q))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub size: usize,
}

impl Register {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        Register {
            name: name.into(),
            size,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Instruction(Instruction),
    Assertion(Assertion),
}

/// Inlined program: declared registers plus an ordered list of instructions
/// and assertion points.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlatProgram {
    pub qregs: Vec<Register>,
    pub cregs: Vec<Register>,
    pub steps: Vec<Step>,
}

/// Resolves a flat index into `(register, offset)`.
pub(crate) fn locate(regs: &[Register], mut index: usize) -> Option<(&Register, usize)> {
    for r in regs {
        if index < r.size {
            return Some((r, index));
        }
        index -= r.size;
    }
    None
}

pub(crate) fn register_offset(regs: &[Register], name: &str) -> Option<(usize, usize)> {
    let mut offset = 0;
    for r in regs {
        if r.name == name {
            return Some((offset, r.size));
        }
        offset += r.size;
    }
    None
}

pub(crate) fn bit_name(regs: &[Register], index: usize) -> String {
    match locate(regs, index) {
        Some((r, i)) => format!("{}[{}]", r.name, i),
        None => format!("?[{}]", index),
    }
}

impl FlatProgram {
    pub fn num_qubits(&self) -> usize {
        self.qregs.iter().map(|r| r.size).sum()
    }

    pub fn num_clbits(&self) -> usize {
        self.cregs.iter().map(|r| r.size).sum()
    }

    /// `q[0]`-style name of a qubit.
    pub fn qubit_name(&self, q: Qubit) -> String {
        bit_name(&self.qregs, q.0)
    }

    pub fn clbit_name(&self, c: Clbit) -> String {
        bit_name(&self.cregs, c.0)
    }

    /// Looks up `reg[index]`.
    pub fn qubit(&self, reg: &str, index: usize) -> Option<Qubit> {
        let (offset, size) = register_offset(&self.qregs, reg)?;
        (index < size).then_some(Qubit(offset + index))
    }

    pub fn instructions(&self) -> impl Iterator<Item = &Instruction> {
        self.steps.iter().filter_map(|s| match s {
            Step::Instruction(i) => Some(i),
            Step::Assertion(_) => None,
        })
    }

    pub fn assertions(&self) -> impl Iterator<Item = &Assertion> {
        self.steps.iter().filter_map(|s| match s {
            Step::Assertion(a) => Some(a),
            Step::Instruction(_) => None,
        })
    }

    /// Checks that every reference is in range and that assertion targets
    /// are distinct.
    pub fn validate(&self) -> Result<(), String> {
        let nq = self.num_qubits();
        let nc = self.num_clbits();
        for step in &self.steps {
            match step {
                Step::Instruction(instr) => {
                    if let Some(q) = instr.qubits().iter().find(|q| q.0 >= nq) {
                        return Err(format!("qubit index {} out of range", q.0));
                    }
                    if let Instruction::Measure { clbit, .. } = instr {
                        if clbit.0 >= nc {
                            return Err(format!("classical bit index {} out of range", clbit.0));
                        }
                    }
                }
                Step::Assertion(a) => {
                    if a.targets.is_empty() {
                        return Err(format!("assertion {} has no targets", a.id));
                    }
                    for (i, q) in a.targets.iter().enumerate() {
                        if q.0 >= nq {
                            return Err(format!("assertion {} targets qubit {}", a.id, q.0));
                        }
                        if a.targets[..i].contains(q) {
                            return Err(format!("assertion {} repeats qubit {}", a.id, q.0));
                        }
                    }
                    if a.labels.len() != a.targets.len() {
                        return Err(format!("assertion {} label count mismatch", a.id));
                    }
                }
            }
        }
        Ok(())
    }

    /// Program with all assertion steps removed.
    pub fn without_assertions(&self) -> FlatProgram {
        FlatProgram {
            qregs: self.qregs.clone(),
            cregs: self.cregs.clone(),
            steps: self
                .steps
                .iter()
                .filter(|s| matches!(s, Step::Instruction(_)))
                .cloned()
                .collect(),
        }
    }
}

impl fmt::Display for Qubit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

pub(crate) fn label_for(reg: &str, index: usize) -> String {
    let mut s = reg.to_string();
    s.push_str(&index.to_string());
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn g(gate: Gate, qs: &[usize]) -> Instruction {
        Instruction::gate(gate, qs.iter().map(|&q| Qubit(q)).collect()).unwrap()
    }

    #[test]
    fn cx_splits_control_and_target() {
        let acted = g(Gate::Cx, &[1, 2]).acted_qubits();
        assert_eq!(acted.controls, vec![Qubit(1)]);
        assert_eq!(acted.targets, vec![Qubit(2)]);
    }

    #[test]
    fn single_qubit_gate_has_only_a_target() {
        let acted = g(Gate::H, &[0]).acted_qubits();
        assert!(acted.controls.is_empty());
        assert_eq!(acted.targets, vec![Qubit(0)]);
    }

    #[test]
    fn measurement_targets_its_qubit() {
        let acted = Instruction::measure(Qubit(0), Clbit(0)).acted_qubits();
        assert!(acted.controls.is_empty());
        assert_eq!(acted.targets, vec![Qubit(0)]);
    }

    #[test]
    fn ccx_has_two_controls() {
        let acted = g(Gate::Ccx, &[0, 1, 2]).acted_qubits();
        assert_eq!(acted.controls, vec![Qubit(0), Qubit(1)]);
        assert_eq!(acted.targets, vec![Qubit(2)]);
    }

    #[test]
    fn acted_qubits_partition_operands() {
        for info in GATE_SET.iter() {
            let params = vec![0.25; info.num_params];
            let gate = Gate::from_name(info.name, &params).unwrap();
            let qs: Vec<usize> = (0..info.num_qubits).collect();
            let instr = g(gate, &qs);
            let acted = instr.acted_qubits();
            let mut all = acted.controls.clone();
            all.extend(acted.targets.iter().copied());
            assert_eq!(all, instr.qubits());
            assert!(acted.controls.iter().all(|c| !acted.targets.contains(c)));
        }
    }

    #[test]
    fn named_and_angle_inverses() {
        assert_eq!(g(Gate::S, &[0]).inverse().unwrap(), g(Gate::Sdg, &[0]));
        assert_eq!(g(Gate::Rz(0.3), &[0]).inverse().unwrap(), g(Gate::Rz(-0.3), &[0]));
        assert_eq!(g(Gate::H, &[0]).inverse().unwrap(), g(Gate::H, &[0]));
        assert_eq!(g(Gate::Ccx, &[0, 1, 2]).inverse().unwrap(), g(Gate::Ccx, &[0, 1, 2]));
        assert_eq!(g(Gate::Swap, &[0, 1]).inverse().unwrap(), g(Gate::Swap, &[0, 1]));
    }

    #[test]
    fn inverse_round_trips_for_every_gate() {
        for info in GATE_SET.iter() {
            let params = vec![0.7; info.num_params];
            let gate = Gate::from_name(info.name, &params).unwrap();
            assert_eq!(gate.inverse().inverse(), gate);
            let expected = match info.inverse {
                InverseRule::SelfInverse => gate,
                InverseRule::Named(n) => Gate::from_name(n, &[]).unwrap(),
                InverseRule::NegateAngle => Gate::from_name(info.name, &[-0.7]).unwrap(),
            };
            assert_eq!(gate.inverse(), expected);
        }
    }

    #[test]
    fn measurement_cannot_be_inverted() {
        let m = Instruction::measure(Qubit(0), Clbit(0));
        assert_eq!(m.inverse(), Err(CircuitError::NonUnitary));
        assert_eq!(invert_circuit(&[g(Gate::H, &[0]), m]), Err(CircuitError::NonUnitary));
    }

    #[test]
    fn invert_circuit_reverses() {
        let body = vec![g(Gate::H, &[0]), g(Gate::Z, &[0])];
        assert_eq!(invert_circuit(&body).unwrap(), vec![g(Gate::Z, &[0]), g(Gate::H, &[0])]);
        assert!(invert_circuit(&[]).unwrap().is_empty());

        let body = vec![g(Gate::Rx(0.7), &[0]), g(Gate::Cx, &[0, 1])];
        assert_eq!(
            invert_circuit(&body).unwrap(),
            vec![g(Gate::Cx, &[0, 1]), g(Gate::Rx(-0.7), &[0])]
        );
    }

    #[test]
    fn gate_constructor_rejects_bad_operands() {
        assert!(matches!(
            Instruction::gate(Gate::Cx, vec![Qubit(0)]),
            Err(CircuitError::Arity { .. })
        ));
        assert_eq!(
            Instruction::gate(Gate::Cx, vec![Qubit(1), Qubit(1)]),
            Err(CircuitError::DuplicateOperand(1))
        );
    }
}
