use alloc::{
    format,
    string::{String, ToString},
    vec,
    vec::Vec,
};

use num_complex::Complex64;

use super::ast::*;
use super::{Pos, QasmError, QasmErrorKind};
use crate::circuit::{
    label_for, register_offset, Assertion, AssertionKind, Clbit, CircuitError, FlatProgram, Gate,
    Instruction, Qubit, Register, Step,
};

/// A resolved qubit together with the source-level name it was reached by.
type Bound = (Qubit, String);

enum Binding<'b> {
    Top,
    Gate {
        formals: &'b [String],
        actual: &'b [Bound],
    },
    Block(&'b [RegDecl]),
}

struct Inliner<'a> {
    ast: &'a Ast,
    qregs: Vec<Register>,
    cregs: Vec<Register>,
    stack: Vec<&'a str>,
    next_id: usize,
}

fn err(pos: Pos, kind: QasmErrorKind) -> QasmError {
    QasmError::new(pos, kind)
}

/// Expands custom gates, register broadcasts and assertion payloads.
///
/// Assertions receive 1-based ids in the order they appear in the expanded
/// program, so an assertion inside a gate body yields one assertion per call.
pub fn inline(ast: &Ast) -> Result<FlatProgram, QasmError> {
    let to_regs = |decls: &[RegDecl]| -> Vec<Register> {
        decls.iter().map(|d| Register::new(d.name.clone(), d.size)).collect()
    };
    let mut inl = Inliner {
        ast,
        qregs: to_regs(&ast.qregs),
        cregs: to_regs(&ast.cregs),
        stack: Vec::new(),
        next_id: 1,
    };
    let mut steps = Vec::new();
    for stmt in &ast.statements {
        inl.stmt(stmt, &Binding::Top, &[], &mut steps)?;
    }
    let prog = FlatProgram {
        qregs: inl.qregs,
        cregs: inl.cregs,
        steps,
    };
    debug_assert!(prog.validate().is_ok());
    Ok(prog)
}

impl<'a> Inliner<'a> {
    fn resolve(&self, op: &Operand, binding: &Binding) -> Result<Vec<Bound>, QasmError> {
        match binding {
            Binding::Gate { formals, actual } => {
                let i = formals
                    .iter()
                    .position(|f| f == &op.reg)
                    .ok_or_else(|| err(op.pos, QasmErrorKind::UnknownRegister(op.reg.clone())))?;
                let (q, _) = &actual[i];
                return Ok(vec![(*q, op.reg.clone())]);
            }
            Binding::Top => {}
            Binding::Block(decls) => {
                let mut offset = 0;
                for d in decls.iter() {
                    if d.name == op.reg {
                        return Ok(index_range(op, offset, d.size)?
                            .into_iter()
                            .map(|(q, i)| (q, label_for(&d.name, i)))
                            .collect());
                    }
                    offset += d.size;
                }
                return Err(err(op.pos, QasmErrorKind::UnknownRegister(op.reg.clone())));
            }
        }
        let (offset, size) = register_offset(&self.qregs, &op.reg)
            .ok_or_else(|| err(op.pos, QasmErrorKind::UnknownRegister(op.reg.clone())))?;
        Ok(index_range(op, offset, size)?
            .into_iter()
            .map(|(q, i)| (q, label_for(&op.reg, i)))
            .collect())
    }

    fn qubit_desc(&self, q: Qubit, binding: &Binding) -> String {
        match binding {
            Binding::Top => crate::circuit::bit_name(&self.qregs, q.0),
            _ => format!("{q}"),
        }
    }

    /// Resolves every argument and zips register arguments element-wise.
    fn broadcast(
        &self,
        args: &[Operand],
        binding: &Binding,
        pos: Pos,
    ) -> Result<Vec<Vec<Bound>>, QasmError> {
        let resolved: Vec<Vec<Bound>> = args
            .iter()
            .map(|a| self.resolve(a, binding))
            .collect::<Result<_, _>>()?;
        let mut width = 1;
        for r in &resolved {
            if r.len() != 1 {
                if width != 1 && width != r.len() {
                    return Err(err(pos, QasmErrorKind::BroadcastMismatch(width, r.len())));
                }
                width = r.len();
            }
        }
        let rows = (0..width)
            .map(|k| {
                resolved
                    .iter()
                    .map(|r| if r.len() == 1 { r[0].clone() } else { r[k].clone() })
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>();
        for row in &rows {
            for (i, (q, _)) in row.iter().enumerate() {
                if row[..i].iter().any(|(p, _)| p == q) {
                    return Err(err(
                        pos,
                        QasmErrorKind::DuplicateOperand(self.qubit_desc(*q, binding)),
                    ));
                }
            }
        }
        Ok(rows)
    }

    fn stmt(
        &mut self,
        stmt: &'a Stmt,
        binding: &Binding,
        env: &[(String, f64)],
        out: &mut Vec<Step>,
    ) -> Result<(), QasmError> {
        match stmt {
            Stmt::Gate(call) => self.call(call, binding, env, out),
            Stmt::Barrier { args, .. } => {
                let mut qubits = Vec::new();
                for a in args {
                    for (q, _) in self.resolve(a, binding)? {
                        if !qubits.contains(&q) {
                            qubits.push(q);
                        }
                    }
                }
                out.push(Step::Instruction(Instruction::Barrier { qubits }));
                Ok(())
            }
            Stmt::Measure { src, dst, pos } => {
                let qs = self.resolve(src, binding)?;
                let (offset, size) = register_offset(&self.cregs, &dst.reg)
                    .ok_or_else(|| err(dst.pos, QasmErrorKind::UnknownRegister(dst.reg.clone())))?;
                let cs = index_range(dst, offset, size)?;
                if qs.len() != cs.len() {
                    return Err(err(*pos, QasmErrorKind::BroadcastMismatch(qs.len(), cs.len())));
                }
                for ((q, _), (c, _)) in qs.into_iter().zip(cs) {
                    out.push(Step::Instruction(Instruction::measure(q, Clbit(c.0))));
                }
                Ok(())
            }
            Stmt::Assert(a) => {
                let assertion = self.assertion(a, binding, env)?;
                out.push(Step::Assertion(assertion));
                Ok(())
            }
        }
    }

    fn call(
        &mut self,
        call: &'a GateCall,
        binding: &Binding,
        env: &[(String, f64)],
        out: &mut Vec<Step>,
    ) -> Result<(), QasmError> {
        let params: Vec<f64> = call
            .params
            .iter()
            .map(|e| e.eval_real(env, call.pos))
            .collect::<Result<_, _>>()?;

        if let Some(gate) = Gate::from_name(&call.name, &params) {
            for row in self.broadcast(&call.args, binding, call.pos)? {
                let qubits = row.into_iter().map(|(q, _)| q).collect();
                let instr = Instruction::gate(gate, qubits).map_err(|e| match e {
                    CircuitError::Arity { name, expected, got } => err(
                        call.pos,
                        QasmErrorKind::QubitCount {
                            name: name.to_string(),
                            expected,
                            got,
                        },
                    ),
                    other => err(call.pos, QasmErrorKind::Invalid(other.to_string())),
                })?;
                out.push(Step::Instruction(instr));
            }
            return Ok(());
        }
        if let Some(info) = crate::circuit::gate_info(&call.name) {
            return Err(err(
                call.pos,
                QasmErrorKind::ParamCount {
                    name: call.name.clone(),
                    expected: info.num_params,
                    got: params.len(),
                },
            ));
        }

        let ast = self.ast;
        let def = ast
            .gate(&call.name)
            .ok_or_else(|| err(call.pos, QasmErrorKind::UnknownGate(call.name.clone())))?;
        if def.params.len() != params.len() {
            return Err(err(
                call.pos,
                QasmErrorKind::ParamCount {
                    name: def.name.clone(),
                    expected: def.params.len(),
                    got: params.len(),
                },
            ));
        }
        if def.qubits.len() != call.args.len() {
            return Err(err(
                call.pos,
                QasmErrorKind::QubitCount {
                    name: def.name.clone(),
                    expected: def.qubits.len(),
                    got: call.args.len(),
                },
            ));
        }
        if self.stack.contains(&def.name.as_str()) {
            let mut cycle: Vec<&str> = self.stack.clone();
            cycle.push(&def.name);
            let start = cycle.iter().position(|n| *n == def.name).unwrap_or(0);
            return Err(err(call.pos, QasmErrorKind::Recursion(cycle[start..].join(" -> "))));
        }
        let inner_env: Vec<(String, f64)> = def.params.iter().cloned().zip(params).collect();
        self.stack.push(&def.name);
        for row in self.broadcast(&call.args, binding, call.pos)? {
            let inner = Binding::Gate {
                formals: &def.qubits,
                actual: &row,
            };
            for s in &def.body {
                self.stmt(s, &inner, &inner_env, out)?;
            }
        }
        self.stack.pop();
        Ok(())
    }

    fn assertion(
        &mut self,
        a: &'a AssertStmt,
        binding: &Binding,
        env: &[(String, f64)],
    ) -> Result<Assertion, QasmError> {
        let mut targets = Vec::new();
        let mut labels = Vec::new();
        for op in &a.targets {
            for (q, label) in self.resolve(op, binding)? {
                if targets.contains(&q) {
                    return Err(err(
                        op.pos,
                        QasmErrorKind::DuplicateOperand(self.qubit_desc(q, binding)),
                    ));
                }
                targets.push(q);
                labels.push(label);
            }
        }
        let kind = match &a.payload {
            AssertPayload::Superposition => AssertionKind::Superposition,
            AssertPayload::Ket(bits) => {
                let index = bits.bytes().fold(0usize, |acc, b| (acc << 1) | usize::from(b == b'1'));
                let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << bits.len()];
                amps[index] = Complex64::new(1.0, 0.0);
                AssertionKind::EqualityState(amps)
            }
            AssertPayload::Amplitudes(amps) => AssertionKind::EqualityState(amps.clone()),
            AssertPayload::Circuit(block) => {
                let mut steps = Vec::new();
                let scope = Binding::Block(&block.qregs);
                for s in &block.body {
                    self.stmt(s, &scope, env, &mut steps)?;
                }
                let mut body = Vec::with_capacity(steps.len());
                for s in steps {
                    match s {
                        Step::Instruction(i) => body.push(i),
                        Step::Assertion(_) => {
                            return Err(err(
                                a.pos,
                                QasmErrorKind::Invalid(
                                    "assertions are not allowed inside circuit blocks".into(),
                                ),
                            ))
                        }
                    }
                }
                AssertionKind::EqualityCircuit {
                    body,
                    num_qubits: block.qregs.iter().map(|r| r.size).sum(),
                }
            }
        };
        let id = self.next_id;
        self.next_id += 1;
        Ok(Assertion {
            id,
            targets,
            labels,
            kind,
        })
    }
}

fn index_range(op: &Operand, offset: usize, size: usize) -> Result<Vec<(Qubit, usize)>, QasmError> {
    match op.index {
        Some(i) if i >= size => Err(err(
            op.pos,
            QasmErrorKind::IndexOutOfRange {
                reg: op.reg.clone(),
                index: i,
                size,
            },
        )),
        Some(i) => Ok(vec![(Qubit(offset + i), i)]),
        None => Ok((0..size).map(|i| (Qubit(offset + i), i)).collect()),
    }
}
