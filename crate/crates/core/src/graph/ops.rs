//! Simple-node operations.

use crate::types::{FnSig, Type, I1};
use std::fmt;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Shl,
    Shr,
    And,
    Or,
    Xor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl BinOp {
    pub const ALL: [BinOp; 10] =
        [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Rem, BinOp::Shl, BinOp::Shr, BinOp::And, BinOp::Or, BinOp::Xor];

    pub fn name(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
            BinOp::Rem => "rem",
            BinOp::Shl => "shl",
            BinOp::Shr => "shr",
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Xor => "xor",
        }
    }

    pub fn from_name(s: &str) -> Option<BinOp> {
        BinOp::ALL.iter().copied().find(|b| b.name() == s)
    }

    pub fn commutative(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Mul | BinOp::And | BinOp::Or | BinOp::Xor)
    }

    /// Whether evaluation can trap (division by zero).
    pub fn can_trap(self) -> bool {
        matches!(self, BinOp::Div | BinOp::Rem)
    }

    /// Whether the operator is defined on `f64`.
    pub fn float_ok(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div)
    }
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

    pub fn name(self) -> &'static str {
        match self {
            CmpOp::Eq => "eq",
            CmpOp::Ne => "ne",
            CmpOp::Lt => "lt",
            CmpOp::Le => "le",
            CmpOp::Gt => "gt",
            CmpOp::Ge => "ge",
        }
    }

    pub fn from_name(s: &str) -> Option<CmpOp> {
        CmpOp::ALL.iter().copied().find(|c| c.name() == s)
    }

    pub fn commutative(self) -> bool {
        matches!(self, CmpOp::Eq | CmpOp::Ne)
    }
}

/// Literal constant. Floats are stored as raw bits so literals are `Eq + Hash`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Lit {
    Int { width: u8, bits: u64 },
    F64(u64),
}

impl Lit {
    pub fn int(width: u8, value: i64) -> Lit {
        Lit::Int { width, bits: mask(width, value as u64) }
    }

    pub fn f64(v: f64) -> Lit {
        Lit::F64(v.to_bits())
    }

    pub fn ty(&self) -> Type {
        match self {
            Lit::Int { width, .. } => Type::Int(*width),
            Lit::F64(_) => Type::F64,
        }
    }

    /// Signed value of an integer literal.
    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Lit::Int { width, bits } => Some(sext(*width, *bits)),
            Lit::F64(_) => None,
        }
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lit::Int { width, bits } => write!(f, "{}", sext(*width, *bits)),
            Lit::F64(b) => write!(f, "{:?}", f64::from_bits(*b)),
        }
    }
}

/// Truncate `v` to `width` bits.
pub fn mask(width: u8, v: u64) -> u64 {
    if width >= 64 {
        v
    } else {
        v & ((1u64 << width) - 1)
    }
}

/// Sign-extend the low `width` bits of `v`.
pub fn sext(width: u8, v: u64) -> i64 {
    if width >= 64 {
        v as i64
    } else {
        let s = 64 - width as u32;
        ((v << s) as i64) >> s
    }
}

/// Case table of a match operation: listed values map to alternatives, all
/// other values to `default`. Produces `ctl(k)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatchTable {
    pub cases: Vec<(u64, u32)>,
    pub default: u32,
    pub k: u32,
}

impl MatchTable {
    /// Table used for k-way branches: value `v < k-1` selects `v`, everything else `k-1`.
    pub fn identity(k: u32) -> MatchTable {
        MatchTable { cases: (0..k.saturating_sub(1)).map(|i| (i as u64, i)).collect(), default: k - 1, k }
    }

    pub fn lookup(&self, bits: u64) -> u32 {
        self.cases.iter().find(|(v, _)| *v == bits).map(|(_, a)| *a).unwrap_or(self.default)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Bin(BinOp, Type),
    Neg(Type),
    Cmp(CmpOp, Type),
    Const(Lit),
    Undef(Type),
    /// Integer of type `ty` to `ctl(table.k)`.
    Match {
        ty: Type,
        table: MatchTable,
    },
    /// `(mem) -> (ptr, mem)`; allocates `count` cells.
    Alloca {
        elem: Type,
        count: u64,
    },
    /// `(ptr, mem) -> (value, mem)`.
    Load(Type),
    /// `(ptr, value, mem) -> (mem)`.
    Store(Type),
    /// `(ptr, i64) -> ptr`, element-scaled offset.
    Gep(Type),
    /// `(fn, params...) -> results`, with the lowered signature.
    Apply(Arc<FnSig>),
}

impl Op {
    pub fn input_types(&self) -> Vec<Type> {
        match self {
            Op::Bin(_, t) | Op::Cmp(_, t) => vec![t.clone(), t.clone()],
            Op::Neg(t) => vec![t.clone()],
            Op::Const(_) | Op::Undef(_) => vec![],
            Op::Match { ty, .. } => vec![ty.clone()],
            Op::Alloca { .. } => vec![Type::Mem],
            Op::Load(_) => vec![Type::Ptr, Type::Mem],
            Op::Store(t) => vec![Type::Ptr, t.clone(), Type::Mem],
            Op::Gep(_) => vec![Type::Ptr, Type::Int(64)],
            Op::Apply(sig) => {
                let mut v = vec![Type::Fn(sig.clone())];
                v.extend(sig.params.iter().cloned());
                v
            }
        }
    }

    pub fn output_types(&self) -> Vec<Type> {
        match self {
            Op::Bin(_, t) | Op::Neg(t) => vec![t.clone()],
            Op::Cmp(..) => vec![I1],
            Op::Const(l) => vec![l.ty()],
            Op::Undef(t) => vec![t.clone()],
            Op::Match { table, .. } => vec![Type::Ctl(table.k)],
            Op::Alloca { .. } => vec![Type::Ptr, Type::Mem],
            Op::Load(t) => vec![t.clone(), Type::Mem],
            Op::Store(_) => vec![Type::Mem],
            Op::Gep(_) => vec![Type::Ptr],
            Op::Apply(sig) => sig.results.clone(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Op::Bin(b, _) => b.name().to_string(),
            Op::Neg(_) => "neg".into(),
            Op::Cmp(c, _) => c.name().to_string(),
            Op::Const(_) => "const".into(),
            Op::Undef(_) => "undef".into(),
            Op::Match { .. } => "match".into(),
            Op::Alloca { .. } => "alloca".into(),
            Op::Load(_) => "load".into(),
            Op::Store(_) => "store".into(),
            Op::Gep(_) => "gep".into(),
            Op::Apply(_) => "apply".into(),
        }
    }

    /// Whether the operation touches a state edge.
    pub fn stateful(&self) -> bool {
        matches!(self, Op::Alloca { .. } | Op::Load(_) | Op::Store(_) | Op::Apply(_))
    }

    pub fn can_trap(&self) -> bool {
        match self {
            Op::Bin(b, t) => b.can_trap() && t.is_int(),
            _ => self.stateful(),
        }
    }

    /// Whether the first two inputs may be swapped.
    pub fn commutative(&self) -> bool {
        match self {
            Op::Bin(b, _) => b.commutative(),
            Op::Cmp(c, _) => c.commutative(),
            _ => false,
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Op::Const(_))
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::Bin(b, t) => write!(f, "{}.{t}", b.name()),
            Op::Neg(t) => write!(f, "neg.{t}"),
            Op::Cmp(c, t) => write!(f, "{}.{t}", c.name()),
            Op::Const(l) => write!(f, "const.{} {l}", l.ty()),
            Op::Undef(t) => write!(f, "undef.{t}"),
            Op::Match { ty, table } => {
                write!(f, "match.{ty} [")?;
                for (i, (v, a)) in table.cases.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}->{a}")?;
                }
                write!(f, "] default {} k {}", table.default, table.k)
            }
            Op::Alloca { elem, count } => write!(f, "alloca.{elem} {count}"),
            Op::Load(t) => write!(f, "load.{t}"),
            Op::Store(t) => write!(f, "store.{t}"),
            Op::Gep(t) => write!(f, "gep.{t}"),
            Op::Apply(sig) => write!(f, "apply {sig}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_extension() {
        assert_eq!(sext(8, 0xff), -1);
        assert_eq!(sext(1, 1), -1);
        assert_eq!(mask(8, u64::MAX), 0xff);
        assert_eq!(Lit::int(8, -1).as_i64(), Some(-1));
    }

    #[test]
    fn identity_table() {
        let t = MatchTable::identity(3);
        assert_eq!(t.lookup(0), 0);
        assert_eq!(t.lookup(1), 1);
        assert_eq!(t.lookup(2), 2);
        assert_eq!(t.lookup(99), 2);
    }
}
