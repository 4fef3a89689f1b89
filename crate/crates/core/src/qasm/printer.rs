use alloc::{format, string::String, vec::Vec};
use core::fmt::Write as _;

use num_complex::Complex64;

use crate::circuit::{bit_name, Assertion, AssertionKind, FlatProgram, Instruction, Register};

/// Shortest decimal form that parses back to the same `f64`.
pub fn format_angle(x: f64) -> String {
    format!("{x}")
}

/// `a`, `bi`, `a+bi` or `a-bi`.
pub fn format_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format_angle(z.re)
    } else if z.re == 0.0 {
        format!("{}i", z.im)
    } else if z.im.is_sign_negative() {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

/// One instruction as a source line without the trailing newline.
pub fn print_instruction(instr: &Instruction, qregs: &[Register], cregs: &[Register]) -> String {
    let q = |i: usize| bit_name(qregs, i);
    match instr {
        Instruction::Gate { gate, qubits } => {
            let args: Vec<String> = qubits.iter().map(|x| q(x.0)).collect();
            match gate.angle() {
                Some(a) => format!("{}({}) {};", gate.name(), format_angle(a), args.join(", ")),
                None => format!("{} {};", gate.name(), args.join(", ")),
            }
        }
        Instruction::Measure { qubit, clbit } => {
            format!("measure {} -> {};", q(qubit.0), bit_name(cregs, clbit.0))
        }
        Instruction::Barrier { qubits } => {
            let args: Vec<String> = qubits.iter().map(|x| q(x.0)).collect();
            format!("barrier {};", args.join(", "))
        }
    }
}

fn print_assertion(out: &mut String, a: &Assertion, qregs: &[Register]) {
    let targets: Vec<String> = a.targets.iter().map(|t| bit_name(qregs, t.0)).collect();
    let targets = targets.join(", ");
    match &a.kind {
        AssertionKind::Superposition => {
            let _ = writeln!(out, "assert-sup {targets};");
        }
        AssertionKind::EqualityState(amps) => {
            let amps: Vec<String> = amps.iter().map(|z| format_complex(*z)).collect();
            let _ = writeln!(out, "assert-eq {targets} = {{ {} }};", amps.join(", "));
        }
        AssertionKind::EqualityCircuit { body, num_qubits } => {
            let local = [Register::new("t", *num_qubits)];
            let _ = writeln!(out, "assert-eq {targets} {{");
            let _ = writeln!(out, "    qreg t[{num_qubits}];");
            for instr in body {
                let _ = writeln!(out, "    {}", print_instruction(instr, &local, &[]));
            }
            let _ = writeln!(out, "}}");
        }
    }
}

/// Writes a flat program as source text that [`parse_flat`](super::parse_flat)
/// reads back to the same instruction sequence.
pub fn print_program(prog: &FlatProgram) -> String {
    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    for r in &prog.qregs {
        let _ = writeln!(out, "qreg {}[{}];", r.name, r.size);
    }
    for r in &prog.cregs {
        let _ = writeln!(out, "creg {}[{}];", r.name, r.size);
    }
    for step in &prog.steps {
        match step {
            crate::circuit::Step::Instruction(i) => {
                out.push_str(&print_instruction(i, &prog.qregs, &prog.cregs));
                out.push('\n');
            }
            crate::circuit::Step::Assertion(a) => print_assertion(&mut out, a, &prog.qregs),
        }
    }
    out
}
