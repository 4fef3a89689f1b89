use alloc::{string::String, vec::Vec};

use super::{Pos, QasmError, QasmErrorKind};

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Int(u64),
    Real(f64),
    /// A numeric literal directly followed by `i`, e.g. `0.5i`.
    Imag(f64),
    Str(String),
    /// Contents of a ket literal `|...>` without the delimiters.
    Ket(String),
    AssertSup,
    AssertEq,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Arrow,
    Equals,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        use alloc::format;
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::Real(x) => format!("number `{x}`"),
            Tok::Imag(x) => format!("imaginary number `{x}i`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Ket(s) => format!("ket `|{s}>`"),
            Tok::AssertSup => "`assert-sup`".into(),
            Tok::AssertEq => "`assert-eq`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Equals => "`=`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

struct Lexer<'a> {
    chars: core::iter::Peekable<core::str::Chars<'a>>,
    line: usize,
    col: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

impl<'a> Lexer<'a> {
    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn error(pos: Pos, msg: impl Into<String>) -> QasmError {
        QasmError::new(pos, QasmErrorKind::Syntax(msg.into()))
    }

    fn skip_trivia(&mut self) -> Result<(), QasmError> {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') => {
                    let mut ahead = self.chars.clone();
                    ahead.next();
                    match ahead.next() {
                        Some('/') => {
                            while let Some(c) = self.peek() {
                                if c == '\n' {
                                    break;
                                }
                                self.bump();
                            }
                        }
                        Some('*') => {
                            let start = self.pos();
                            self.bump();
                            self.bump();
                            let mut prev = '\0';
                            loop {
                                match self.bump() {
                                    Some('/') if prev == '*' => break,
                                    Some(c) => prev = c,
                                    None => return Err(Self::error(start, "unterminated block comment")),
                                }
                            }
                        }
                        _ => return Ok(()),
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn number(&mut self, pos: Pos) -> Result<Tok, QasmError> {
        let mut text = String::new();
        let mut is_real = false;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                text.push(c);
                self.bump();
            } else if c == '.' && !is_real {
                is_real = true;
                text.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let mut ahead = self.chars.clone();
            ahead.next();
            let next = ahead.next();
            let after = ahead.next();
            let exp_ok = match next {
                Some(d) if d.is_ascii_digit() => true,
                Some('+' | '-') => after.is_some_and(|d| d.is_ascii_digit()),
                _ => false,
            };
            if exp_ok {
                is_real = true;
                text.push('e');
                self.bump();
                if let Some(s @ ('+' | '-')) = self.peek() {
                    text.push(s);
                    self.bump();
                }
                while let Some(d) = self.peek().filter(char::is_ascii_digit) {
                    text.push(d);
                    self.bump();
                }
            }
        }
        if text == "." {
            return Err(Self::error(pos, "stray `.`"));
        }
        let imag = if self.peek() == Some('i') {
            let mut ahead = self.chars.clone();
            ahead.next();
            !ahead.next().is_some_and(is_ident_char)
        } else {
            false
        };
        if imag {
            self.bump();
        }
        if !is_real && !imag {
            return text
                .parse::<u64>()
                .map(Tok::Int)
                .map_err(|_| Self::error(pos, "integer literal too large"));
        }
        let value = text
            .parse::<f64>()
            .map_err(|_| Self::error(pos, alloc::format!("malformed number `{text}`")))?;
        Ok(if imag { Tok::Imag(value) } else { Tok::Real(value) })
    }

    fn next_token(&mut self) -> Result<Token, QasmError> {
        self.skip_trivia()?;
        let pos = self.pos();
        let Some(c) = self.peek() else {
            return Ok(Token { tok: Tok::Eof, pos });
        };
        let tok = if is_ident_start(c) {
            let mut name = String::new();
            while let Some(c) = self.peek().filter(|&c| is_ident_char(c)) {
                name.push(c);
                self.bump();
            }
            if name == "assert" && self.peek() == Some('-') {
                self.bump();
                let mut kind = String::new();
                while let Some(c) = self.peek().filter(|&c| is_ident_char(c)) {
                    kind.push(c);
                    self.bump();
                }
                match kind.as_str() {
                    "sup" => Tok::AssertSup,
                    "eq" => Tok::AssertEq,
                    _ => return Err(Self::error(pos, alloc::format!("unknown assertion `assert-{kind}`"))),
                }
            } else {
                Tok::Ident(name)
            }
        } else if c.is_ascii_digit() || c == '.' {
            self.number(pos)?
        } else {
            self.bump();
            match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                ',' => Tok::Comma,
                ';' => Tok::Semi,
                '=' => Tok::Equals,
                '+' => Tok::Plus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                '^' => Tok::Caret,
                '-' => {
                    if self.peek() == Some('>') {
                        self.bump();
                        Tok::Arrow
                    } else {
                        Tok::Minus
                    }
                }
                '"' => {
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            Some('"') => break,
                            Some('\n') | None => return Err(Self::error(pos, "unterminated string")),
                            Some(c) => s.push(c),
                        }
                    }
                    Tok::Str(s)
                }
                '|' => {
                    let mut bits = String::new();
                    loop {
                        match self.bump() {
                            Some('>' | '\u{27E9}') => break,
                            Some(b @ ('0' | '1')) => bits.push(b),
                            Some(other) => {
                                return Err(Self::error(
                                    pos,
                                    alloc::format!("unexpected `{other}` in ket literal"),
                                ))
                            }
                            None => return Err(Self::error(pos, "unterminated ket literal")),
                        }
                    }
                    if bits.is_empty() {
                        return Err(Self::error(pos, "empty ket literal"));
                    }
                    Tok::Ket(bits)
                }
                other => return Err(Self::error(pos, alloc::format!("unexpected character `{other}`"))),
            }
        };
        Ok(Token { tok, pos })
    }
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, QasmError> {
    let mut lexer = Lexer {
        chars: src.chars().peekable(),
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        let t = lexer.next_token()?;
        let done = t.tok == Tok::Eof;
        out.push(t);
        if done {
            return Ok(out);
        }
    }
}
