//! Port and value types shared by the source IR and the graph.

use std::fmt;
use std::sync::Arc;

/// Type of a port, variable or value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    /// Two's-complement integer of the given bit width (1, 8, 16, 32 or 64).
    Int(u8),
    F64,
    Ptr,
    Fn(Arc<FnSig>),
    /// Control value ranging over `[0, k)`.
    Ctl(u32),
    Mem,
    Io,
}

/// Function signature. In the graph, signatures carry the trailing
/// memory and io states on both sides; the source IR omits them.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FnSig {
    pub params: Vec<Type>,
    pub results: Vec<Type>,
}

pub const I1: Type = Type::Int(1);
pub const I64: Type = Type::Int(64);

pub const INT_WIDTHS: [u8; 5] = [1, 8, 16, 32, 64];

impl Type {
    pub fn is_state(&self) -> bool {
        matches!(self, Type::Mem | Type::Io)
    }

    pub fn is_value(&self) -> bool {
        !self.is_state()
    }

    pub fn is_int(&self) -> bool {
        matches!(self, Type::Int(_))
    }

    pub fn func(params: Vec<Type>, results: Vec<Type>) -> Type {
        Type::Fn(Arc::new(FnSig { params, results }))
    }

    /// Narrowest integer type able to hold every index in `[0, k)`.
    pub fn narrowest_int(k: u32) -> Type {
        let bits = if k <= 2 {
            1
        } else if k <= 256 {
            8
        } else if k <= 65536 {
            16
        } else {
            32
        };
        Type::Int(bits)
    }

    /// Map a source-level type to its graph form (function types gain states).
    pub fn lower(&self) -> Type {
        match self {
            Type::Fn(sig) => Type::Fn(Arc::new(sig.lower())),
            Type::Ctl(_) => self.clone(),
            t => t.clone(),
        }
    }

    /// Inverse of [`Type::lower`]; control values become the narrowest integer.
    pub fn raise(&self) -> Type {
        match self {
            Type::Fn(sig) => Type::Fn(Arc::new(sig.raise())),
            Type::Ctl(k) => Type::narrowest_int(*k),
            t => t.clone(),
        }
    }

    pub fn well_formed(&self) -> bool {
        match self {
            Type::Int(w) => INT_WIDTHS.contains(w),
            Type::Ctl(k) => *k >= 1,
            Type::Fn(sig) => sig.params.iter().chain(&sig.results).all(Type::well_formed),
            _ => true,
        }
    }
}

impl FnSig {
    pub fn lower(&self) -> FnSig {
        let mut params: Vec<Type> = self.params.iter().map(Type::lower).collect();
        let mut results: Vec<Type> = self.results.iter().map(Type::lower).collect();
        params.extend([Type::Mem, Type::Io]);
        results.extend([Type::Mem, Type::Io]);
        FnSig { params, results }
    }

    pub fn raise(&self) -> FnSig {
        let strip = |v: &[Type]| v.iter().filter(|t| !t.is_state()).map(Type::raise).collect();
        FnSig { params: strip(&self.params), results: strip(&self.results) }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int(w) => write!(f, "i{w}"),
            Type::F64 => write!(f, "f64"),
            Type::Ptr => write!(f, "ptr"),
            Type::Fn(sig) => write!(f, "{sig}"),
            Type::Ctl(k) => write!(f, "ctl{k}"),
            Type::Mem => write!(f, "mem"),
            Type::Io => write!(f, "io"),
        }
    }
}

impl fmt::Display for FnSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fn(")?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ") -> ")?;
        match self.results.len() {
            0 => write!(f, "void"),
            1 => write!(f, "{}", self.results[0]),
            _ => {
                write!(f, "(")?;
                for (i, r) in self.results.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{r}")?;
                }
                write!(f, ")")
            }
        }
    }
}
