//! Lexer and recursive-descent parser for the textual source IR.

use super::*;
use crate::graph::MatchTable;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("invalid module: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Word(String),
    Label(String),
    Var(String),
    Sym(String),
    Int(i64),
    Float(f64),
    Punct(&'static str),
    Eof,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

fn name_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'.'
}

impl Lexer<'_> {
    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax { line: self.line, col: self.col, msg: msg.into() }
    }

    fn bump(&mut self) -> u8 {
        let c = self.src[self.pos];
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn name(&mut self) -> String {
        let start = self.pos;
        while self.peek().is_some_and(name_char) {
            self.bump();
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize, usize)>, ParseError> {
        let mut out = Vec::new();
        loop {
            while let Some(c) = self.peek() {
                if c.is_ascii_whitespace() {
                    self.bump();
                } else if c == b';' {
                    while self.peek().is_some_and(|c| c != b'\n') {
                        self.bump();
                    }
                } else {
                    break;
                }
            }
            let (line, col) = (self.line, self.col);
            let Some(c) = self.peek() else {
                out.push((Tok::Eof, line, col));
                return Ok(out);
            };
            let tok = match c {
                b'%' | b'@' => {
                    self.bump();
                    let n = self.name();
                    if n.is_empty() {
                        return Err(self.err("expected a name"));
                    }
                    if c == b'%' {
                        Tok::Var(n)
                    } else {
                        Tok::Sym(n)
                    }
                }
                b'-' if self.src.get(self.pos + 1) == Some(&b'>') => {
                    self.bump();
                    self.bump();
                    Tok::Punct("->")
                }
                b'-' | b'0'..=b'9' => self.number()?,
                b'(' | b')' | b'{' | b'}' | b'[' | b']' | b',' | b'=' | b':' => {
                    self.bump();
                    Tok::Punct(match c {
                        b'(' => "(",
                        b')' => ")",
                        b'{' => "{",
                        b'}' => "}",
                        b'[' => "[",
                        b']' => "]",
                        b',' => ",",
                        b'=' => "=",
                        _ => ":",
                    })
                }
                c if name_char(c) => {
                    let n = self.name();
                    if self.peek() == Some(b':') {
                        self.bump();
                        Tok::Label(n)
                    } else {
                        Tok::Word(n)
                    }
                }
                _ => return Err(self.err(format!("unexpected character '{}'", c as char))),
            };
            out.push((tok, line, col));
        }
    }

    fn number(&mut self) -> Result<Tok, ParseError> {
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.bump();
        }
        let mut float = false;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                self.bump();
            } else if c == b'.' || c == b'e' || c == b'E' || ((c == b'-' || c == b'+') && float) {
                float = true;
                self.bump();
            } else if c.is_ascii_alphabetic() {
                // inf / NaN spellings
                float = true;
                self.bump();
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if float {
            text.parse::<f64>().map(Tok::Float).map_err(|_| self.err(format!("bad float literal '{text}'")))
        } else {
            text.parse::<i64>().map(Tok::Int).map_err(|_| self.err(format!("bad integer literal '{text}'")))
        }
    }
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let (_, line, col) = &self.toks[self.pos];
        Err(ParseError::Syntax { line: *line, col: *col, msg: msg.into() })
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Word(x) if x == w)
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(x) if *x == p)
    }

    fn expect_word(&mut self, w: &str) -> PResult<()> {
        if self.is_word(w) {
            self.next();
            Ok(())
        } else {
            self.err(format!("expected '{w}', found {}", describe(self.peek())))
        }
    }

    fn expect(&mut self, p: &str) -> PResult<()> {
        if self.is_punct(p) {
            self.next();
            Ok(())
        } else {
            self.err(format!("expected '{p}', found {}", describe(self.peek())))
        }
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.next();
            true
        } else {
            false
        }
    }

    fn var(&mut self) -> PResult<String> {
        match self.next() {
            Tok::Var(v) => Ok(v),
            t => {
                self.pos -= 1;
                self.err(format!("expected %name, found {}", describe(&t)))
            }
        }
    }

    fn sym(&mut self) -> PResult<String> {
        match self.next() {
            Tok::Sym(v) => Ok(v),
            t => {
                self.pos -= 1;
                self.err(format!("expected @name, found {}", describe(&t)))
            }
        }
    }

    fn uint(&mut self) -> PResult<u64> {
        match self.next() {
            Tok::Int(v) if v >= 0 => Ok(v as u64),
            t => {
                self.pos -= 1;
                self.err(format!("expected non-negative integer, found {}", describe(&t)))
            }
        }
    }

    fn ret_type(&mut self) -> PResult<Option<Type>> {
        if self.is_word("void") {
            self.next();
            Ok(None)
        } else {
            self.ty().map(Some)
        }
    }

    fn ty(&mut self) -> PResult<Type> {
        let t = match self.peek().clone() {
            Tok::Word(w) => w,
            t => return self.err(format!("expected a type, found {}", describe(&t))),
        };
        self.next();
        Ok(match t.as_str() {
            "i1" => Type::Int(1),
            "i8" => Type::Int(8),
            "i16" => Type::Int(16),
            "i32" => Type::Int(32),
            "i64" => Type::Int(64),
            "f64" => Type::F64,
            "ptr" => Type::Ptr,
            "fn" => {
                self.expect("(")?;
                let mut params = Vec::new();
                if !self.is_punct(")") {
                    loop {
                        params.push(self.ty()?);
                        if !self.eat(",") {
                            break;
                        }
                    }
                }
                self.expect(")")?;
                self.expect("->")?;
                let ret = self.ret_type()?;
                Type::func(params, ret.into_iter().collect())
            }
            _ => {
                self.pos -= 1;
                return self.err(format!("unknown type '{t}'"));
            }
        })
    }

    fn operand(&mut self) -> PResult<Operand> {
        Ok(match self.next() {
            Tok::Var(v) => Operand::Var(v),
            Tok::Sym(s) => Operand::Sym(s),
            Tok::Int(i) => Operand::Int(i),
            Tok::Float(f) => Operand::Float(f),
            Tok::Word(w) if w == "undef" => Operand::Undef,
            Tok::Word(w) if w == "inf" => Operand::Float(f64::INFINITY),
            Tok::Word(w) if w == "NaN" => Operand::Float(f64::NAN),
            t => {
                self.pos -= 1;
                return self.err(format!("expected an operand, found {}", describe(&t)));
            }
        })
    }

    fn starts_operand(&self) -> bool {
        match self.peek() {
            Tok::Var(_) | Tok::Sym(_) | Tok::Int(_) | Tok::Float(_) => true,
            Tok::Word(w) => w == "undef",
            _ => false,
        }
    }

    fn module(&mut self) -> PResult<Module> {
        let mut m = Module { globals: Vec::new(), functions: Vec::new() };
        while *self.peek() != Tok::Eof {
            let exported = if self.is_word("export") {
                self.next();
                true
            } else {
                false
            };
            if self.is_word("define") {
                self.next();
                let ret = self.ret_type()?;
                let name = self.sym()?;
                self.expect("(")?;
                let mut params = Vec::new();
                if !self.is_punct(")") {
                    loop {
                        let t = self.ty()?;
                        let v = self.var()?;
                        params.push((v, t));
                        if !self.eat(",") {
                            break;
                        }
                    }
                }
                self.expect(")")?;
                let body = self.body()?;
                m.functions.push(Function { name, params, ret, exported, body: Some(body) });
            } else if self.is_word("global") {
                self.next();
                let ty = self.ty()?;
                let name = self.sym()?;
                self.expect("=")?;
                let init = self.body()?;
                m.globals.push(Global { name, ty, exported, init: Some(init) });
            } else if self.is_word("external") && !exported {
                self.next();
                let name = self.sym()?;
                self.expect(":")?;
                let ty = self.ty()?;
                match ty {
                    Type::Fn(sig) => m.functions.push(Function {
                        name,
                        params: sig.params.iter().enumerate().map(|(i, t)| (format!("p{i}"), t.clone())).collect(),
                        ret: sig.results.first().cloned(),
                        exported: false,
                        body: None,
                    }),
                    ty => m.globals.push(Global { name, ty, exported: false, init: None }),
                }
            } else {
                return self.err(format!("expected 'define', 'global' or 'external', found {}", describe(self.peek())));
            }
        }
        Ok(m)
    }

    fn body(&mut self) -> PResult<Cfg> {
        self.expect("{")?;
        let mut blocks = Vec::new();
        while !self.is_punct("}") {
            let label = match self.peek().clone() {
                Tok::Label(l) => {
                    self.next();
                    l
                }
                _ if blocks.is_empty() => "entry".to_string(),
                t => return self.err(format!("expected a block label, found {}", describe(&t))),
            };
            blocks.push(self.block(label)?);
        }
        self.expect("}")?;
        if blocks.is_empty() {
            return self.err("empty body");
        }
        Ok(Cfg { blocks })
    }

    fn block(&mut self, label: String) -> PResult<Block> {
        let mut phis = Vec::new();
        let mut insts = Vec::new();
        loop {
            if let Tok::Word(w) = self.peek().clone() {
                match w.as_str() {
                    "br" => {
                        self.next();
                        self.expect_word("label")?;
                        let t = self.var()?;
                        return Ok(Block { label, phis, insts, term: Term::Br(t) });
                    }
                    "branch" => {
                        self.next();
                        let ty = self.ty()?;
                        let op = self.operand()?;
                        self.expect(",")?;
                        self.expect("[")?;
                        let mut ts = vec![self.var()?];
                        while self.eat(",") {
                            ts.push(self.var()?);
                        }
                        self.expect("]")?;
                        return Ok(Block { label, phis, insts, term: Term::Branch(ty, op, ts) });
                    }
                    "ret" => {
                        self.next();
                        let op =
                            if self.starts_operand() && !matches!(self.peek_at(1), Tok::Punct("=")) { Some(self.operand()?) } else { None };
                        return Ok(Block { label, phis, insts, term: Term::Ret(op) });
                    }
                    _ => {
                        insts.push(Inst { dst: None, kind: self.inst_kind()? });
                        continue;
                    }
                }
            }
            match self.peek().clone() {
                Tok::Var(dst) => {
                    self.next();
                    self.expect("=")?;
                    if self.is_word("phi") {
                        self.next();
                        if !insts.is_empty() {
                            return self.err("phi after a non-phi instruction");
                        }
                        let ty = self.ty()?;
                        let mut incoming = Vec::new();
                        loop {
                            self.expect("[")?;
                            let op = self.operand()?;
                            self.expect(",")?;
                            let bb = self.var()?;
                            self.expect("]")?;
                            incoming.push((op, bb));
                            if !self.eat(",") {
                                break;
                            }
                        }
                        phis.push(Phi { dst, ty, incoming });
                    } else {
                        let kind = self.inst_kind()?;
                        insts.push(Inst { dst: Some(dst), kind });
                    }
                }
                t => return self.err(format!("expected an instruction or terminator, found {}", describe(&t))),
            }
        }
    }

    fn inst_kind(&mut self) -> PResult<InstKind> {
        let w = match self.next() {
            Tok::Word(w) => w,
            t => {
                self.pos -= 1;
                return self.err(format!("expected an opcode, found {}", describe(&t)));
            }
        };
        if let Some(b) = BinOp::from_name(&w) {
            let t = self.ty()?;
            let a = self.operand()?;
            self.expect(",")?;
            let c = self.operand()?;
            return Ok(InstKind::Bin(b, t, a, c));
        }
        if let Some(c) = CmpOp::from_name(&w) {
            let t = self.ty()?;
            let a = self.operand()?;
            self.expect(",")?;
            let b = self.operand()?;
            return Ok(InstKind::Cmp(c, t, a, b));
        }
        Ok(match w.as_str() {
            "neg" => InstKind::Neg(self.ty()?, self.operand()?),
            "copy" => InstKind::Copy(self.ty()?, self.operand()?),
            "match" => {
                let t = self.ty()?;
                let x = self.operand()?;
                self.expect(",")?;
                self.expect("[")?;
                let mut cases = Vec::new();
                if !self.is_punct("]") {
                    loop {
                        let v = match self.next() {
                            Tok::Int(i) => i,
                            t => {
                                self.pos -= 1;
                                return self.err(format!("expected a case value, found {}", describe(&t)));
                            }
                        };
                        self.expect("->")?;
                        let a = self.uint()? as u32;
                        cases.push((v, a));
                        if !self.eat(",") {
                            break;
                        }
                    }
                }
                self.expect("]")?;
                self.expect_word("default")?;
                let default = self.uint()? as u32;
                let mut k = cases.iter().map(|(_, a)| *a).chain([default]).max().unwrap() + 1;
                if self.is_punct(",") && matches!(self.peek_at(1), Tok::Word(w) if w == "k") {
                    self.next();
                    self.next();
                    k = self.uint()? as u32;
                }
                let width = match t {
                    Type::Int(w) => w,
                    _ => return self.err("match requires an integer type"),
                };
                let cases = cases.into_iter().map(|(v, a)| (crate::graph::ops::mask(width, v as u64), a)).collect();
                InstKind::Match(t, x, MatchTable { cases, default, k })
            }
            "alloca" => {
                let t = self.ty()?;
                self.expect(",")?;
                InstKind::Alloca(t, self.uint()?)
            }
            "load" => InstKind::Load(self.ty()?, self.operand()?),
            "store" => {
                let t = self.ty()?;
                let v = self.operand()?;
                self.expect(",")?;
                InstKind::Store(t, v, self.operand()?)
            }
            "gep" => {
                let t = self.ty()?;
                let b = self.operand()?;
                self.expect(",")?;
                InstKind::Gep(t, b, self.operand()?)
            }
            "call" => {
                let ret = self.ret_type()?;
                let callee = self.operand()?;
                self.expect("(")?;
                let mut args = Vec::new();
                if !self.is_punct(")") {
                    loop {
                        let t = self.ty()?;
                        args.push((t, self.operand()?));
                        if !self.eat(",") {
                            break;
                        }
                    }
                }
                self.expect(")")?;
                InstKind::Call { ret, callee, args }
            }
            _ => {
                self.pos -= 1;
                return self.err(format!("unknown opcode '{w}'"));
            }
        })
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Word(w) => format!("'{w}'"),
        Tok::Label(l) => format!("label '{l}:'"),
        Tok::Var(v) => format!("'%{v}'"),
        Tok::Sym(s) => format!("'@{s}'"),
        Tok::Int(i) => format!("'{i}'"),
        Tok::Float(f) => format!("'{f:?}'"),
        Tok::Punct(p) => format!("'{p}'"),
        Tok::Eof => "end of input".into(),
    }
}

/// Parse without semantic validation.
pub fn parse_unchecked(text: &str) -> Result<Module, ParseError> {
    let toks = Lexer { src: text.as_bytes(), pos: 0, line: 1, col: 1 }.tokens()?;
    Parser { toks, pos: 0 }.module()
}

/// Parse and validate a module (name resolution, typing, CFG shape).
pub fn parse(text: &str) -> Result<Module, ParseError> {
    let m = parse_unchecked(text)?;
    let v = validate_module(&m, Mode::NonSsa);
    if !v.is_empty() {
        return Err(ParseError::Invalid(v));
    }
    Ok(m)
}
