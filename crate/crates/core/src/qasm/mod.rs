//! Front end for the assertion-extended OpenQASM 2 dialect.
//!
//! ```text
//! gate oracle x0, x1, x2, y {
//!     assert-sup y;
//!     cx x0, y;
//! }
//! qreg q[3];
//! h q;
//! assert-eq q = |101>;
//! assert-eq q[0] = { 0.6, 0.8i };
//! assert-eq q[1] { qreg t[1]; h t[0]; }
//! ```
//!
//! [`parse_program`] produces an [`Ast`]; [`inline`] expands custom gates and
//! register broadcasts into a [`FlatProgram`](crate::circuit::FlatProgram);
//! [`print_program`] writes a flat program back out as source text.

mod ast;
mod inline;
mod lexer;
mod parser;
mod printer;

use alloc::string::String;
use core::fmt;

use thiserror::Error;

pub use ast::{
    AssertPayload, AssertStmt, Ast, BinOp, CircuitBlock, Expr, Func, GateCall, GateDef, Operand,
    RegDecl, Stmt,
};
pub use inline::inline;
pub use parser::parse_program;
pub use printer::{format_angle, format_complex, print_instruction, print_program};

/// 1-based source position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum QasmErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown gate `{0}`")]
    UnknownGate(String),
    #[error("unknown register `{0}`")]
    UnknownRegister(String),
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("index {index} out of range for register `{reg}` of size {size}")]
    IndexOutOfRange {
        reg: String,
        index: usize,
        size: usize,
    },
    #[error("register `{0}` declared more than once")]
    DuplicateRegister(String),
    #[error("gate `{0}` defined more than once")]
    DuplicateGate(String),
    #[error("gate `{name}` expects {expected} qubit argument(s), got {got}")]
    QubitCount {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("gate `{name}` expects {expected} parameter(s), got {got}")]
    ParamCount {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("register sizes differ in broadcast ({0} vs {1})")]
    BroadcastMismatch(usize, usize),
    #[error("qubit `{0}` used more than once in one statement")]
    DuplicateOperand(String),
    #[error("amplitude list length {0} is not a power of two")]
    AmplitudesNotPowerOfTwo(usize),
    #[error("amplitude list length {len} does not match 2^{targets} = {expected}")]
    AmplitudeCount {
        len: usize,
        targets: usize,
        expected: usize,
    },
    #[error("amplitudes are not normalized (sum of squared magnitudes is {0})")]
    NotNormalized(f64),
    #[error("ket has {got} bit(s) but the assertion has {expected} target(s)")]
    KetLength { expected: usize, got: usize },
    #[error("circuit block declares {got} qubit(s) but the assertion has {expected} target(s)")]
    BlockSize { expected: usize, got: usize },
    #[error("assertion over {0} qubits is too wide")]
    TooWide(usize),
    #[error("recursive gate definition: {0}")]
    Recursion(String),
    #[error("expression must be real, got {0}{1:+}i")]
    ComplexAngle(f64, f64),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("{pos}: {kind}")]
pub struct QasmError {
    pub pos: Pos,
    pub kind: QasmErrorKind,
}

impl QasmError {
    pub fn new(pos: Pos, kind: QasmErrorKind) -> Self {
        QasmError { pos, kind }
    }
}

/// Widest assertion whose state vector the front end will materialize.
pub const MAX_ASSERTION_QUBITS: usize = 24;

/// Parses and inlines in one step.
pub fn parse_flat(src: &str) -> Result<crate::circuit::FlatProgram, QasmError> {
    inline(&parse_program(src)?)
}
