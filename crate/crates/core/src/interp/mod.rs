//! Reference evaluators for source CFGs and graphs, sharing one value model,
//! one memory model and one set of operator semantics so that their results
//! and side-effect traces can be compared exactly.
//!
//! Integers wrap (two's complement), signed division truncates toward zero
//! and division by zero traps. Pointers are symbolic: a base (a global by
//! name or the n-th stack allocation) plus a cell offset, so traces do not
//! depend on layout.

pub mod builtins;
pub mod cfg;
pub mod oracle;
pub mod rvsdg;

use crate::graph::ops::{mask, sext};
use crate::graph::{BinOp, CmpOp, Lit, MatchTable};
use crate::types::Type;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

pub use cfg::eval_cfg;
pub use rvsdg::eval_rvsdg;

/// Default fuel: maximum number of evaluated operations.
pub const DEFAULT_FUEL: u64 = 10_000_000;
/// Maximum nesting of calls before reporting a stack overflow.
pub const MAX_CALL_DEPTH: u32 = 100;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Base {
    Null,
    Global(Arc<str>),
    Stack(u32),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Ptr {
    pub base: Base,
    pub off: i64,
}

#[derive(Clone, Debug)]
pub enum Value {
    Int { width: u8, bits: u64 },
    F64(f64),
    Ptr(Ptr),
    Fn(Arc<str>),
    Ctl { idx: u32, k: u32 },
    State,
}

impl PartialEq for Value {
    fn eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Int { width: a, bits: x }, Value::Int { width: b, bits: y }) => a == b && x == y,
            (Value::F64(a), Value::F64(b)) => a.to_bits() == b.to_bits(),
            (Value::Ptr(a), Value::Ptr(b)) => a == b,
            (Value::Fn(a), Value::Fn(b)) => a == b,
            (Value::Ctl { idx: a, k: x }, Value::Ctl { idx: b, k: y }) => a == b && x == y,
            (Value::State, Value::State) => true,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Value {
    pub fn int(width: u8, v: i64) -> Value {
        Value::Int { width, bits: mask(width, v as u64) }
    }

    pub fn i64(v: i64) -> Value {
        Value::int(64, v)
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int { width, bits } => Some(sext(*width, *bits)),
            _ => None,
        }
    }

    pub fn lit(l: &Lit) -> Value {
        match *l {
            Lit::Int { width, bits } => Value::Int { width, bits },
            Lit::F64(b) => Value::F64(f64::from_bits(b)),
        }
    }

    /// Zero of a type; also the meaning of `undef`.
    pub fn zero(ty: &Type) -> Value {
        match ty {
            Type::Int(w) => Value::Int { width: *w, bits: 0 },
            Type::F64 => Value::F64(0.0),
            Type::Ptr => Value::Ptr(Ptr { base: Base::Null, off: 0 }),
            Type::Fn(_) => Value::Fn(Arc::from("")),
            Type::Ctl(k) => Value::Ctl { idx: 0, k: *k },
            Type::Mem | Type::Io => Value::State,
        }
    }

    /// Whether the value inhabits `ty` (function signatures are not checked).
    pub fn has_type(&self, ty: &Type) -> bool {
        match (self, ty) {
            (Value::Int { width, .. }, Type::Int(w)) => width == w,
            (Value::F64(_), Type::F64) | (Value::Ptr(_), Type::Ptr) | (Value::Fn(_), Type::Fn(_)) => true,
            (Value::Ctl { k, .. }, Type::Ctl(j)) => k == j,
            (Value::State, t) => t.is_state(),
            _ => false,
        }
    }
}

impl fmt::Display for Ptr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.base {
            Base::Null => write!(f, "null+{}", self.off),
            Base::Global(g) => write!(f, "@{g}+{}", self.off),
            Base::Stack(s) => write!(f, "$s{s}+{}", self.off),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int { width, bits } => write!(f, "i{width} {}", sext(*width, *bits)),
            Value::F64(x) => write!(f, "f64 {x:?}"),
            Value::Ptr(p) => write!(f, "ptr {p}"),
            Value::Fn(n) => write!(f, "fn @{n}"),
            Value::Ctl { idx, k } => write!(f, "ctl{k} {idx}"),
            Value::State => write!(f, "state"),
        }
    }
}

/// Externally observable event.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    Load(Ptr),
    Store(Ptr, Value),
    Call(String),
    Io(String),
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Load(p) => write!(f, "load {p}"),
            Event::Store(p, v) => write!(f, "store {p} <- {v}"),
            Event::Call(n) => write!(f, "call @{n}"),
            Event::Io(s) => write!(f, "io {s}"),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum Trap {
    #[error("division by zero")]
    DivByZero,
    #[error("invalid address {0}")]
    InvalidAddress(String),
    #[error("fuel exhausted")]
    OutOfFuel,
    #[error("call depth exceeded")]
    StackOverflow,
    #[error("unresolved callee @{0}")]
    Unresolved(String),
    #[error("type confusion: {0}")]
    TypeConfusion(String),
    #[error("malformed program: {0}")]
    BadProgram(String),
}

/// Successful evaluation: the returned value (if any) and the event trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Run {
    pub result: Option<Value>,
    pub trace: Vec<Event>,
}

impl Run {
    /// Line-oriented rendering for golden files.
    pub fn render(&self) -> String {
        let mut s = match &self.result {
            Some(v) => format!("result {v}\n"),
            None => "result void\n".to_string(),
        };
        for e in &self.trace {
            s.push_str(&e.to_string());
            s.push('\n');
        }
        s
    }
}

/// Memory, trace and resource counters of one evaluation.
#[derive(Debug)]
pub struct Machine {
    cells: HashMap<Base, Vec<Option<Value>>>,
    next_stack: u32,
    pub trace: Vec<Event>,
    pub fuel: u64,
    pub depth: u32,
}

impl Machine {
    pub fn new(fuel: u64) -> Machine {
        Machine { cells: HashMap::new(), next_stack: 0, trace: Vec::new(), fuel, depth: 0 }
    }

    pub fn tick(&mut self) -> Result<(), Trap> {
        if self.fuel == 0 {
            return Err(Trap::OutOfFuel);
        }
        self.fuel -= 1;
        Ok(())
    }

    pub fn enter(&mut self) -> Result<(), Trap> {
        if self.depth >= MAX_CALL_DEPTH {
            return Err(Trap::StackOverflow);
        }
        self.depth += 1;
        Ok(())
    }

    pub fn leave(&mut self) {
        self.depth -= 1;
    }

    pub fn alloca(&mut self, count: u64) -> Value {
        let id = self.next_stack;
        self.next_stack += 1;
        self.cells.insert(Base::Stack(id), vec![None; count as usize]);
        Value::Ptr(Ptr { base: Base::Stack(id), off: 0 })
    }

    pub fn define_global(&mut self, name: &str, init: Option<Value>) {
        self.cells.insert(Base::Global(Arc::from(name)), vec![init]);
    }

    fn cell(&mut self, p: &Ptr) -> Result<&mut Option<Value>, Trap> {
        let cells = self.cells.get_mut(&p.base).ok_or_else(|| Trap::InvalidAddress(p.to_string()))?;
        if p.off < 0 || p.off as usize >= cells.len() {
            return Err(Trap::InvalidAddress(p.to_string()));
        }
        Ok(&mut cells[p.off as usize])
    }

    pub fn load(&mut self, p: &Value, ty: &Type) -> Result<Value, Trap> {
        let Value::Ptr(p) = p else { return Err(Trap::TypeConfusion(format!("load through {p}"))) };
        let v = self.cell(p)?.clone();
        self.trace.push(Event::Load(p.clone()));
        match v {
            None => Ok(Value::zero(ty)),
            Some(v) if v.has_type(ty) => Ok(v),
            Some(v) => Err(Trap::TypeConfusion(format!("loaded {v} as {ty}"))),
        }
    }

    pub fn store(&mut self, p: &Value, v: Value) -> Result<(), Trap> {
        let Value::Ptr(p) = p else { return Err(Trap::TypeConfusion(format!("store through {p}"))) };
        *self.cell(p)? = Some(v.clone());
        self.trace.push(Event::Store(p.clone(), v));
        Ok(())
    }
}

fn int_parts(v: &Value) -> Result<(u8, u64), Trap> {
    match v {
        Value::Int { width, bits } => Ok((*width, *bits)),
        v => Err(Trap::TypeConfusion(format!("expected integer, got {v}"))),
    }
}

fn float(v: &Value) -> Result<f64, Trap> {
    match v {
        Value::F64(x) => Ok(*x),
        v => Err(Trap::TypeConfusion(format!("expected f64, got {v}"))),
    }
}

pub fn eval_bin(op: BinOp, ty: &Type, a: &Value, b: &Value) -> Result<Value, Trap> {
    if *ty == Type::F64 {
        let (x, y) = (float(a)?, float(b)?);
        return Ok(Value::F64(match op {
            BinOp::Add => x + y,
            BinOp::Sub => x - y,
            BinOp::Mul => x * y,
            BinOp::Div => x / y,
            _ => return Err(Trap::BadProgram(format!("{} on f64", op.name()))),
        }));
    }
    let (w, x) = int_parts(a)?;
    let (_, y) = int_parts(b)?;
    let (sx, sy) = (sext(w, x), sext(w, y));
    let sh = (y % w as u64) as u32;
    let r: u64 = match op {
        BinOp::Add => x.wrapping_add(y),
        BinOp::Sub => x.wrapping_sub(y),
        BinOp::Mul => x.wrapping_mul(y),
        BinOp::Div => {
            if sy == 0 {
                return Err(Trap::DivByZero);
            }
            sx.wrapping_div(sy) as u64
        }
        BinOp::Rem => {
            if sy == 0 {
                return Err(Trap::DivByZero);
            }
            sx.wrapping_rem(sy) as u64
        }
        BinOp::Shl => x.wrapping_shl(sh),
        BinOp::Shr => sx.wrapping_shr(sh) as u64,
        BinOp::And => x & y,
        BinOp::Or => x | y,
        BinOp::Xor => x ^ y,
    };
    Ok(Value::Int { width: w, bits: mask(w, r) })
}

pub fn eval_neg(ty: &Type, a: &Value) -> Result<Value, Trap> {
    if *ty == Type::F64 {
        return Ok(Value::F64(-float(a)?));
    }
    let (w, x) = int_parts(a)?;
    Ok(Value::Int { width: w, bits: mask(w, x.wrapping_neg()) })
}

pub fn eval_cmp(op: CmpOp, ty: &Type, a: &Value, b: &Value) -> Result<Value, Trap> {
    let r = if *ty == Type::F64 {
        let (x, y) = (float(a)?, float(b)?);
        match op {
            CmpOp::Eq => x == y,
            CmpOp::Ne => x != y,
            CmpOp::Lt => x < y,
            CmpOp::Le => x <= y,
            CmpOp::Gt => x > y,
            CmpOp::Ge => x >= y,
        }
    } else {
        let (w, x) = int_parts(a)?;
        let (_, y) = int_parts(b)?;
        let (x, y) = (sext(w, x), sext(w, y));
        match op {
            CmpOp::Eq => x == y,
            CmpOp::Ne => x != y,
            CmpOp::Lt => x < y,
            CmpOp::Le => x <= y,
            CmpOp::Gt => x > y,
            CmpOp::Ge => x >= y,
        }
    };
    Ok(Value::Int { width: 1, bits: r as u64 })
}

/// Alternative index selected by `table` for integer `v`.
pub fn eval_match(table: &MatchTable, v: &Value) -> Result<u32, Trap> {
    let (_, bits) = int_parts(v)?;
    Ok(table.lookup(bits))
}

/// Target index of a k-way branch on `v`.
pub fn branch_index(v: &Value, k: usize) -> Result<usize, Trap> {
    let (_, bits) = int_parts(v)?;
    Ok(if bits < (k as u64).saturating_sub(1) { bits as usize } else { k - 1 })
}

pub fn eval_gep(base: &Value, idx: &Value) -> Result<Value, Trap> {
    let Value::Ptr(p) = base else { return Err(Trap::TypeConfusion(format!("gep on {base}"))) };
    let i = idx.as_i64().ok_or_else(|| Trap::TypeConfusion(format!("gep index {idx}")))?;
    Ok(Value::Ptr(Ptr { base: p.base.clone(), off: p.off.wrapping_add(i) }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn division_semantics() {
        let t = Type::Int(64);
        assert_eq!(eval_bin(BinOp::Div, &t, &Value::i64(-7), &Value::i64(2)).unwrap(), Value::i64(-3));
        assert_eq!(eval_bin(BinOp::Rem, &t, &Value::i64(-7), &Value::i64(2)).unwrap(), Value::i64(-1));
        assert_eq!(eval_bin(BinOp::Div, &t, &Value::i64(1), &Value::i64(0)), Err(Trap::DivByZero));
        assert_eq!(eval_bin(BinOp::Div, &t, &Value::i64(i64::MIN), &Value::i64(-1)).unwrap(), Value::i64(i64::MIN));
    }

    #[test]
    fn wrapping_narrow() {
        let t = Type::Int(8);
        assert_eq!(eval_bin(BinOp::Add, &t, &Value::int(8, 127), &Value::int(8, 1)).unwrap(), Value::int(8, -128));
        assert_eq!(eval_cmp(CmpOp::Lt, &t, &Value::int(8, -1), &Value::int(8, 0)).unwrap(), Value::int(1, 1));
    }

    #[test]
    fn store_then_load() {
        let mut m = Machine::new(10);
        let p = m.alloca(1);
        m.store(&p, Value::i64(9)).unwrap();
        assert_eq!(m.load(&p, &Type::Int(64)).unwrap(), Value::i64(9));
        assert!(matches!(m.trace[0], Event::Store(..)));
        assert!(matches!(m.trace[1], Event::Load(..)));
    }
}
