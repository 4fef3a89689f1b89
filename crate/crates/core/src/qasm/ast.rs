//! Syntax tree produced by [`parse_program`](super::parse_program).

use alloc::{boxed::Box, string::String, vec::Vec};

use num_complex::Complex64;

use super::{Pos, QasmError, QasmErrorKind};

#[derive(Clone, Debug, PartialEq)]
pub struct Ast {
    pub qregs: Vec<RegDecl>,
    pub cregs: Vec<RegDecl>,
    pub gates: Vec<GateDef>,
    /// Top-level statements in source order.
    pub statements: Vec<Stmt>,
}

impl Ast {
    pub fn gate(&self, name: &str) -> Option<&GateDef> {
        self.gates.iter().find(|g| g.name == name)
    }

    /// Top-level assertions only (not those inside gate bodies).
    pub fn assertions(&self) -> impl Iterator<Item = &AssertStmt> {
        self.statements.iter().filter_map(|s| match s {
            Stmt::Assert(a) => Some(a),
            _ => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegDecl {
    pub name: String,
    pub size: usize,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateDef {
    pub name: String,
    pub params: Vec<String>,
    pub qubits: Vec<String>,
    pub body: Vec<Stmt>,
    pub pos: Pos,
}

/// `reg` or `reg[index]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Operand {
    pub reg: String,
    pub index: Option<usize>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateCall {
    pub name: String,
    pub params: Vec<Expr>,
    pub args: Vec<Operand>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    Gate(GateCall),
    Measure { src: Operand, dst: Operand, pos: Pos },
    Barrier { args: Vec<Operand>, pos: Pos },
    Assert(AssertStmt),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssertStmt {
    pub targets: Vec<Operand>,
    pub payload: AssertPayload,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub enum AssertPayload {
    Superposition,
    /// Bits of a ket literal, first bit for the first target.
    Ket(String),
    Amplitudes(Vec<Complex64>),
    Circuit(CircuitBlock),
}

/// Body of `assert-eq targets { ... }`: local registers plus gate calls.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitBlock {
    pub qregs: Vec<RegDecl>,
    pub body: Vec<Stmt>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Imag(f64),
    Pi,
    /// A gate parameter, or the imaginary unit `i` when no parameter of that
    /// name is in scope.
    Ident(String, Pos),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

fn is_real(z: Complex64) -> bool {
    z.im == 0.0
}

impl Expr {
    /// Evaluates with `env` binding gate parameter names.
    pub fn eval(&self, env: &[(String, f64)]) -> Result<Complex64, QasmError> {
        Ok(match self {
            Expr::Num(x) => Complex64::new(*x, 0.0),
            Expr::Imag(x) => Complex64::new(0.0, *x),
            Expr::Pi => Complex64::new(core::f64::consts::PI, 0.0),
            Expr::Ident(name, pos) => match env.iter().rev().find(|(n, _)| n == name) {
                Some((_, v)) => Complex64::new(*v, 0.0),
                None if name == "i" => Complex64::new(0.0, 1.0),
                None => {
                    return Err(QasmError::new(
                        *pos,
                        QasmErrorKind::UnknownIdentifier(name.clone()),
                    ))
                }
            },
            Expr::Neg(e) => -e.eval(env)?,
            Expr::Bin(op, l, r) => {
                let (a, b) = (l.eval(env)?, r.eval(env)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => {
                        if is_real(a) && is_real(b) {
                            Complex64::new(a.re * b.re, 0.0)
                        } else {
                            a * b
                        }
                    }
                    BinOp::Div => {
                        if is_real(a) && is_real(b) {
                            Complex64::new(a.re / b.re, 0.0)
                        } else {
                            a / b
                        }
                    }
                    BinOp::Pow => {
                        if is_real(a) && is_real(b) && (a.re >= 0.0 || b.re == libm::trunc(b.re)) {
                            Complex64::new(libm::pow(a.re, b.re), 0.0)
                        } else {
                            a.powc(b)
                        }
                    }
                }
            }
            Expr::Call(f, e) => {
                let z = e.eval(env)?;
                if is_real(z) && !(matches!(f, Func::Sqrt | Func::Ln) && z.re < 0.0) {
                    let x = z.re;
                    Complex64::new(
                        match f {
                            Func::Sin => libm::sin(x),
                            Func::Cos => libm::cos(x),
                            Func::Tan => libm::tan(x),
                            Func::Exp => libm::exp(x),
                            Func::Ln => libm::log(x),
                            Func::Sqrt => libm::sqrt(x),
                        },
                        0.0,
                    )
                } else {
                    match f {
                        Func::Sin => z.sin(),
                        Func::Cos => z.cos(),
                        Func::Tan => z.tan(),
                        Func::Exp => z.exp(),
                        Func::Ln => z.ln(),
                        Func::Sqrt => z.sqrt(),
                    }
                }
            }
        })
    }

    /// Evaluates an expression that must be real, such as a gate angle.
    pub fn eval_real(&self, env: &[(String, f64)], pos: Pos) -> Result<f64, QasmError> {
        let z = self.eval(env)?;
        if z.im.abs() > 1e-12 {
            return Err(QasmError::new(pos, QasmErrorKind::ComplexAngle(z.re, z.im)));
        }
        Ok(z.re)
    }
}
