use alloc::{
    boxed::Box,
    format,
    string::{String, ToString},
    vec,
    vec::Vec,
};

use num_complex::Complex64;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::{Pos, QasmError, QasmErrorKind, MAX_ASSERTION_QUBITS};
use crate::circuit::gate_info;

const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Where operands are resolved.
enum Scope<'a> {
    /// Global registers.
    Top,
    /// Formal qubit names of a gate definition.
    Gate(&'a [String]),
    /// Registers local to an `assert-eq` circuit block.
    Block(&'a [RegDecl]),
}

struct Parser {
    toks: Vec<Token>,
    at: usize,
    qregs: Vec<RegDecl>,
    cregs: Vec<RegDecl>,
    gates: Vec<GateDef>,
    /// Calls to be checked once every definition is known.
    calls: Vec<(String, Pos)>,
}

fn err(pos: Pos, kind: QasmErrorKind) -> QasmError {
    QasmError::new(pos, kind)
}

/// Parses program text into an [`Ast`].
///
/// Custom gates may be used before their definition; unknown names are
/// reported once the whole file has been read.
pub fn parse_program(src: &str) -> Result<Ast, QasmError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        at: 0,
        qregs: Vec::new(),
        cregs: Vec::new(),
        gates: Vec::new(),
        calls: Vec::new(),
    };
    let statements = p.program()?;
    for (name, pos) in &p.calls {
        if gate_info(name).is_none() && !p.gates.iter().any(|g| &g.name == name) {
            return Err(err(*pos, QasmErrorKind::UnknownGate(name.clone())));
        }
    }
    Ok(Ast {
        qregs: p.qregs,
        cregs: p.cregs,
        gates: p.gates,
        statements,
    })
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if t.tok != Tok::Eof {
            self.at += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, wanted: &str) -> QasmError {
        err(
            self.pos(),
            QasmErrorKind::Syntax(format!("expected {wanted}, found {}", self.peek().describe())),
        )
    }

    fn expect(&mut self, tok: Tok) -> Result<Pos, QasmError> {
        if self.peek() == &tok {
            Ok(self.bump().pos)
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), QasmError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let pos = self.bump().pos;
                Ok((s, pos))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn int(&mut self) -> Result<usize, QasmError> {
        match *self.peek() {
            Tok::Int(n) => {
                let pos = self.bump().pos;
                usize::try_from(n).map_err(|_| err(pos, QasmErrorKind::Syntax("integer too large".into())))
            }
            _ => Err(self.unexpected("integer")),
        }
    }

    fn program(&mut self) -> Result<Vec<Stmt>, QasmError> {
        if let Tok::Ident(s) = self.peek() {
            if s == "OPENQASM" {
                self.bump();
                match self.peek() {
                    Tok::Real(_) | Tok::Int(_) => {
                        self.bump();
                    }
                    _ => return Err(self.unexpected("version number")),
                }
                self.expect(Tok::Semi)?;
            }
        }
        let mut stmts = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Eof => return Ok(stmts),
                Tok::Ident(kw) if kw == "include" => {
                    self.bump();
                    match self.peek() {
                        Tok::Str(_) => {
                            self.bump();
                        }
                        _ => return Err(self.unexpected("file name")),
                    }
                    self.expect(Tok::Semi)?;
                }
                Tok::Ident(kw) if kw == "qreg" || kw == "creg" => {
                    self.bump();
                    let decl = self.reg_decl()?;
                    if self.qregs.iter().chain(&self.cregs).any(|r| r.name == decl.name) {
                        return Err(err(decl.pos, QasmErrorKind::DuplicateRegister(decl.name)));
                    }
                    if kw == "qreg" {
                        self.qregs.push(decl);
                    } else {
                        self.cregs.push(decl);
                    }
                }
                Tok::Ident(kw) if kw == "gate" => {
                    let def = self.gate_def()?;
                    self.gates.push(def);
                }
                _ => {
                    let s = self.statement(&Scope::Top, &[])?;
                    stmts.push(s);
                }
            }
        }
    }

    fn reg_decl(&mut self) -> Result<RegDecl, QasmError> {
        let (name, pos) = self.ident()?;
        self.expect(Tok::LBracket)?;
        let size = self.int()?;
        self.expect(Tok::RBracket)?;
        self.expect(Tok::Semi)?;
        if size == 0 {
            return Err(err(pos, QasmErrorKind::Invalid(format!("register `{name}` has size 0"))));
        }
        Ok(RegDecl { name, size, pos })
    }

    fn ident_list(&mut self) -> Result<Vec<(String, Pos)>, QasmError> {
        let mut out = vec![self.ident()?];
        while self.eat(&Tok::Comma) {
            out.push(self.ident()?);
        }
        Ok(out)
    }

    fn gate_def(&mut self) -> Result<GateDef, QasmError> {
        let pos = self.bump().pos;
        let (name, name_pos) = self.ident()?;
        if gate_info(&name).is_some() || self.gates.iter().any(|g| g.name == name) {
            return Err(err(name_pos, QasmErrorKind::DuplicateGate(name)));
        }
        let mut params = Vec::new();
        if self.eat(&Tok::LParen) {
            if !self.eat(&Tok::RParen) {
                params = self.ident_list()?.into_iter().map(|(n, _)| n).collect();
                self.expect(Tok::RParen)?;
            }
        }
        let formals = self.ident_list()?;
        for (i, (f, p)) in formals.iter().enumerate() {
            if formals[..i].iter().any(|(g, _)| g == f) {
                return Err(err(*p, QasmErrorKind::Invalid(format!("duplicate formal qubit `{f}`"))));
            }
        }
        let qubits: Vec<String> = formals.into_iter().map(|(n, _)| n).collect();
        self.expect(Tok::LBrace)?;
        let mut body = Vec::new();
        while !self.eat(&Tok::RBrace) {
            if self.peek() == &Tok::Eof {
                return Err(self.unexpected("`}`"));
            }
            body.push(self.statement(&Scope::Gate(&qubits), &params)?);
        }
        Ok(GateDef {
            name,
            params,
            qubits,
            body,
            pos,
        })
    }

    fn operand(&mut self) -> Result<Operand, QasmError> {
        let (reg, pos) = self.ident()?;
        let index = if self.eat(&Tok::LBracket) {
            let i = self.int()?;
            self.expect(Tok::RBracket)?;
            Some(i)
        } else {
            None
        };
        Ok(Operand { reg, index, pos })
    }

    fn operand_list(&mut self) -> Result<Vec<Operand>, QasmError> {
        let mut out = vec![self.operand()?];
        while self.eat(&Tok::Comma) {
            out.push(self.operand()?);
        }
        Ok(out)
    }

    /// Number of qubits an operand denotes in `scope`.
    fn qubit_width(&self, op: &Operand, scope: &Scope) -> Result<usize, QasmError> {
        let regs: &[RegDecl] = match scope {
            Scope::Top => &self.qregs,
            Scope::Block(regs) => regs,
            Scope::Gate(formals) => {
                if !formals.contains(&op.reg) {
                    return Err(err(op.pos, QasmErrorKind::UnknownRegister(op.reg.clone())));
                }
                if op.index.is_some() {
                    return Err(err(
                        op.pos,
                        QasmErrorKind::Invalid(format!("formal qubit `{}` cannot be indexed", op.reg)),
                    ));
                }
                return Ok(1);
            }
        };
        reg_width(regs, op)
    }

    fn statement(&mut self, scope: &Scope, params: &[String]) -> Result<Stmt, QasmError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::AssertSup | Tok::AssertEq => {
                if matches!(scope, Scope::Block(_)) {
                    return Err(err(
                        pos,
                        QasmErrorKind::Invalid("assertions are not allowed inside circuit blocks".into()),
                    ));
                }
                Ok(Stmt::Assert(self.assertion(scope, params)?))
            }
            Tok::Ident(kw) if kw == "measure" => {
                if !matches!(scope, Scope::Top) {
                    return Err(err(
                        pos,
                        QasmErrorKind::Invalid("measurements are only allowed at top level".into()),
                    ));
                }
                self.bump();
                let src = self.operand()?;
                self.expect(Tok::Arrow)?;
                let dst = self.operand()?;
                self.expect(Tok::Semi)?;
                let a = self.qubit_width(&src, scope)?;
                let b = reg_width(&self.cregs, &dst)?;
                if a != b {
                    return Err(err(pos, QasmErrorKind::BroadcastMismatch(a, b)));
                }
                Ok(Stmt::Measure { src, dst, pos })
            }
            Tok::Ident(kw) if kw == "barrier" => {
                self.bump();
                let args = self.operand_list()?;
                self.expect(Tok::Semi)?;
                for a in &args {
                    self.qubit_width(a, scope)?;
                }
                Ok(Stmt::Barrier { args, pos })
            }
            Tok::Ident(kw) if matches!(kw.as_str(), "qreg" | "creg" | "gate") => Err(err(
                pos,
                QasmErrorKind::Invalid(format!("`{kw}` is only allowed at top level")),
            )),
            Tok::Ident(_) => Ok(Stmt::Gate(self.gate_call(scope, params)?)),
            _ => Err(self.unexpected("statement")),
        }
    }

    fn gate_call(&mut self, scope: &Scope, params: &[String]) -> Result<GateCall, QasmError> {
        let (name, pos) = self.ident()?;
        let mut exprs = Vec::new();
        if self.eat(&Tok::LParen) {
            if !self.eat(&Tok::RParen) {
                exprs.push(self.expr(params)?);
                while self.eat(&Tok::Comma) {
                    exprs.push(self.expr(params)?);
                }
                self.expect(Tok::RParen)?;
            }
        }
        let args = self.operand_list()?;
        self.expect(Tok::Semi)?;
        let mut width = 1;
        for a in &args {
            let w = self.qubit_width(a, scope)?;
            if w != 1 {
                if width != 1 && width != w {
                    return Err(err(a.pos, QasmErrorKind::BroadcastMismatch(width, w)));
                }
                width = w;
            }
        }
        if let Some(info) = gate_info(&name) {
            if exprs.len() != info.num_params {
                return Err(err(
                    pos,
                    QasmErrorKind::ParamCount {
                        name,
                        expected: info.num_params,
                        got: exprs.len(),
                    },
                ));
            }
            if args.len() != info.num_qubits {
                return Err(err(
                    pos,
                    QasmErrorKind::QubitCount {
                        name,
                        expected: info.num_qubits,
                        got: args.len(),
                    },
                ));
            }
        }
        self.calls.push((name.clone(), pos));
        Ok(GateCall {
            name,
            params: exprs,
            args,
            pos,
        })
    }

    fn assertion(&mut self, scope: &Scope, params: &[String]) -> Result<AssertStmt, QasmError> {
        let t = self.bump();
        let pos = t.pos;
        let targets = self.operand_list()?;
        let mut m = 0;
        for op in &targets {
            m += self.qubit_width(op, scope)?;
        }
        if t.tok == Tok::AssertSup {
            self.expect(Tok::Semi)?;
            return Ok(AssertStmt {
                targets,
                payload: AssertPayload::Superposition,
                pos,
            });
        }
        let payload = if self.eat(&Tok::Equals) {
            match self.peek().clone() {
                Tok::Ket(bits) => {
                    let kpos = self.bump().pos;
                    if bits.len() != m {
                        return Err(err(kpos, QasmErrorKind::KetLength { expected: m, got: bits.len() }));
                    }
                    if m > MAX_ASSERTION_QUBITS {
                        return Err(err(kpos, QasmErrorKind::TooWide(m)));
                    }
                    self.expect(Tok::Semi)?;
                    AssertPayload::Ket(bits)
                }
                Tok::LBrace => {
                    let lpos = self.bump().pos;
                    let mut amps = Vec::new();
                    if !self.eat(&Tok::RBrace) {
                        loop {
                            let epos = self.pos();
                            let e = self.expr(&[])?;
                            amps.push(e.eval(&[]).map_err(|e| QasmError::new(epos, e.kind))?);
                            if self.eat(&Tok::RBrace) {
                                break;
                            }
                            self.expect(Tok::Comma)?;
                        }
                    }
                    self.eat(&Tok::Semi);
                    check_amplitudes(&amps, m, lpos)?;
                    AssertPayload::Amplitudes(amps)
                }
                _ => return Err(self.unexpected("ket literal or amplitude list")),
            }
        } else if self.peek() == &Tok::LBrace {
            self.bump();
            let block = self.circuit_block(params)?;
            let got: usize = block.qregs.iter().map(|r| r.size).sum();
            if got != m {
                return Err(err(pos, QasmErrorKind::BlockSize { expected: m, got }));
            }
            self.eat(&Tok::Semi);
            AssertPayload::Circuit(block)
        } else {
            return Err(self.unexpected("`=` or `{`"));
        };
        Ok(AssertStmt {
            targets,
            payload,
            pos,
        })
    }

    fn circuit_block(&mut self, params: &[String]) -> Result<CircuitBlock, QasmError> {
        let mut qregs: Vec<RegDecl> = Vec::new();
        let mut body = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                Tok::Eof => return Err(self.unexpected("`}`")),
                Tok::Ident(kw) if kw == "qreg" => {
                    self.bump();
                    let decl = self.reg_decl()?;
                    if qregs.iter().any(|r| r.name == decl.name) {
                        return Err(err(decl.pos, QasmErrorKind::DuplicateRegister(decl.name)));
                    }
                    qregs.push(decl);
                }
                _ => {
                    let s = self.statement(&Scope::Block(&qregs), params)?;
                    body.push(s);
                }
            }
        }
        Ok(CircuitBlock { qregs, body })
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self, params: &[String]) -> Result<Expr, QasmError> {
        let mut lhs = self.term(params)?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term(params)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self, params: &[String]) -> Result<Expr, QasmError> {
        let mut lhs = self.unary(params)?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary(params)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self, params: &[String]) -> Result<Expr, QasmError> {
        if self.eat(&Tok::Minus) {
            return Ok(Expr::Neg(Box::new(self.unary(params)?)));
        }
        if self.eat(&Tok::Plus) {
            return self.unary(params);
        }
        let base = self.primary(params)?;
        if self.eat(&Tok::Caret) {
            let exp = self.unary(params)?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self, params: &[String]) -> Result<Expr, QasmError> {
        let t = self.bump();
        match t.tok {
            Tok::Int(n) => Ok(Expr::Num(n as f64)),
            Tok::Real(x) => Ok(Expr::Num(x)),
            Tok::Imag(x) => Ok(Expr::Imag(x)),
            Tok::LParen => {
                let e = self.expr(params)?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if name == "pi" {
                    return Ok(Expr::Pi);
                }
                if let Some(f) = Func::from_name(&name) {
                    self.expect(Tok::LParen)?;
                    let arg = self.expr(params)?;
                    self.expect(Tok::RParen)?;
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                if name != "i" && !params.contains(&name) {
                    return Err(err(t.pos, QasmErrorKind::UnknownIdentifier(name)));
                }
                Ok(Expr::Ident(name, t.pos))
            }
            other => {
                self.at -= usize::from(other != Tok::Eof);
                Err(self.unexpected("expression"))
            }
        }
    }
}

fn reg_width(regs: &[RegDecl], op: &Operand) -> Result<usize, QasmError> {
    let Some(reg) = regs.iter().find(|r| r.name == op.reg) else {
        return Err(err(op.pos, QasmErrorKind::UnknownRegister(op.reg.clone())));
    };
    match op.index {
        Some(i) if i >= reg.size => Err(err(
            op.pos,
            QasmErrorKind::IndexOutOfRange {
                reg: reg.name.to_string(),
                index: i,
                size: reg.size,
            },
        )),
        Some(_) => Ok(1),
        None => Ok(reg.size),
    }
}

fn check_amplitudes(amps: &[Complex64], m: usize, pos: Pos) -> Result<(), QasmError> {
    let len = amps.len();
    if len == 0 || !len.is_power_of_two() {
        return Err(err(pos, QasmErrorKind::AmplitudesNotPowerOfTwo(len)));
    }
    if m > MAX_ASSERTION_QUBITS {
        return Err(err(pos, QasmErrorKind::TooWide(m)));
    }
    let expected = 1usize << m;
    if len != expected {
        return Err(err(
            pos,
            QasmErrorKind::AmplitudeCount {
                len,
                targets: m,
                expected,
            },
        ));
    }
    let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    if (norm - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(err(pos, QasmErrorKind::NotNormalized(norm)));
    }
    Ok(())
}
