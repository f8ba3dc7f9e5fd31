//! CFG-based source IR: modules of functions and globals whose bodies are
//! control-flow graphs of basic blocks. See `GRAMMAR.md` for the textual form.

pub mod dom;
pub mod ipg;
pub mod parse;
pub mod print;
pub mod validate;

use crate::graph::{BinOp, CmpOp, MatchTable};
use crate::types::Type;
use std::collections::{BTreeMap, BTreeSet};

pub use ipg::{compute_ipg, Ipg};
pub use parse::{parse, ParseError};
pub use print::print_module;
pub use validate::{validate_cfg, validate_module, Mode};

#[derive(Clone, Debug, PartialEq)]
pub struct Module {
    pub globals: Vec<Global>,
    pub functions: Vec<Function>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Function {
    pub name: String,
    pub params: Vec<(String, Type)>,
    pub ret: Option<Type>,
    pub exported: bool,
    /// `None` for external functions.
    pub body: Option<Cfg>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Global {
    pub name: String,
    pub ty: Type,
    pub exported: bool,
    /// Initializer computing the initial value; `None` for external data.
    pub init: Option<Cfg>,
}

/// Blocks of a function body; block 0 is the entry.
#[derive(Clone, Debug, PartialEq)]
pub struct Cfg {
    pub blocks: Vec<Block>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub label: String,
    pub phis: Vec<Phi>,
    pub insts: Vec<Inst>,
    pub term: Term,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Phi {
    pub dst: String,
    pub ty: Type,
    pub incoming: Vec<(Operand, String)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Inst {
    pub dst: Option<String>,
    pub kind: InstKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InstKind {
    Bin(BinOp, Type, Operand, Operand),
    Neg(Type, Operand),
    Cmp(CmpOp, Type, Operand, Operand),
    Copy(Type, Operand),
    /// Result type is the narrowest integer covering `table.k`.
    Match(Type, Operand, MatchTable),
    Alloca(Type, u64),
    Load(Type, Operand),
    /// `store ty value, pointer`
    Store(Type, Operand, Operand),
    Gep(Type, Operand, Operand),
    Call {
        ret: Option<Type>,
        callee: Operand,
        args: Vec<(Type, Operand)>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    Br(String),
    /// k-way branch: value `v < k-1` selects target `v`, anything else the last.
    Branch(Type, Operand, Vec<String>),
    Ret(Option<Operand>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Operand {
    Var(String),
    Int(i64),
    Float(f64),
    Sym(String),
    Undef,
}

/// Pseudo-variable standing for the memory state in read/write sets.
pub const MEM_VAR: &str = "!mem";
/// Pseudo-variable standing for the io state in read/write sets.
pub const IO_VAR: &str = "!io";

impl Operand {
    pub fn var(&self) -> Option<&str> {
        match self {
            Operand::Var(v) => Some(v),
            _ => None,
        }
    }

    /// Variable-like name read by this operand: `%x` or `@sym`.
    pub fn read_name(&self) -> Option<String> {
        match self {
            Operand::Var(v) => Some(v.clone()),
            Operand::Sym(s) => Some(format!("@{s}")),
            _ => None,
        }
    }
}

impl InstKind {
    /// Value type produced, if any.
    pub fn result_type(&self) -> Option<Type> {
        match self {
            InstKind::Bin(_, t, ..) | InstKind::Neg(t, _) | InstKind::Copy(t, _) => Some(t.clone()),
            InstKind::Cmp(..) => Some(Type::Int(1)),
            InstKind::Match(_, _, table) => Some(Type::narrowest_int(table.k)),
            InstKind::Alloca(..) | InstKind::Gep(..) => Some(Type::Ptr),
            InstKind::Load(t, _) => Some(t.clone()),
            InstKind::Store(..) => None,
            InstKind::Call { ret, .. } => ret.clone(),
        }
    }

    pub fn operands(&self) -> Vec<&Operand> {
        match self {
            InstKind::Bin(_, _, a, b) | InstKind::Cmp(_, _, a, b) | InstKind::Gep(_, a, b) | InstKind::Store(_, a, b) => {
                vec![a, b]
            }
            InstKind::Neg(_, a) | InstKind::Copy(_, a) | InstKind::Match(_, a, _) | InstKind::Load(_, a) => vec![a],
            InstKind::Alloca(..) => vec![],
            InstKind::Call { callee, args, .. } => {
                let mut v = vec![callee];
                v.extend(args.iter().map(|(_, a)| a));
                v
            }
        }
    }

    pub fn operands_mut(&mut self) -> Vec<&mut Operand> {
        match self {
            InstKind::Bin(_, _, a, b) | InstKind::Cmp(_, _, a, b) | InstKind::Gep(_, a, b) | InstKind::Store(_, a, b) => {
                vec![a, b]
            }
            InstKind::Neg(_, a) | InstKind::Copy(_, a) | InstKind::Match(_, a, _) | InstKind::Load(_, a) => vec![a],
            InstKind::Alloca(..) => vec![],
            InstKind::Call { callee, args, .. } => {
                let mut v = vec![callee];
                v.extend(args.iter_mut().map(|(_, a)| a));
                v
            }
        }
    }

    /// Whether the instruction reads and writes the memory state.
    pub fn touches_mem(&self) -> bool {
        matches!(self, InstKind::Alloca(..) | InstKind::Load(..) | InstKind::Store(..) | InstKind::Call { .. })
    }

    pub fn touches_io(&self) -> bool {
        matches!(self, InstKind::Call { .. })
    }
}

impl Inst {
    /// Variables read, in operand order, including state pseudo-variables.
    pub fn reads(&self) -> Vec<String> {
        let mut v: Vec<String> = self.kind.operands().iter().filter_map(|o| o.read_name()).collect();
        if self.kind.touches_mem() {
            v.push(MEM_VAR.into());
        }
        if self.kind.touches_io() {
            v.push(IO_VAR.into());
        }
        v
    }

    /// Variables written, including state pseudo-variables.
    pub fn writes(&self) -> Vec<String> {
        let mut v: Vec<String> = self.dst.iter().cloned().collect();
        if self.kind.touches_mem() {
            v.push(MEM_VAR.into());
        }
        if self.kind.touches_io() {
            v.push(IO_VAR.into());
        }
        v
    }
}

impl Term {
    pub fn targets(&self) -> Vec<&str> {
        match self {
            Term::Br(t) => vec![t],
            Term::Branch(_, _, ts) => ts.iter().map(String::as_str).collect(),
            Term::Ret(_) => vec![],
        }
    }

    pub fn targets_mut(&mut self) -> Vec<&mut String> {
        match self {
            Term::Br(t) => vec![t],
            Term::Branch(_, _, ts) => ts.iter_mut().collect(),
            Term::Ret(_) => vec![],
        }
    }

    pub fn operand(&self) -> Option<&Operand> {
        match self {
            Term::Branch(_, o, _) => Some(o),
            Term::Ret(o) => o.as_ref(),
            Term::Br(_) => None,
        }
    }

    pub fn operand_mut(&mut self) -> Option<&mut Operand> {
        match self {
            Term::Branch(_, o, _) => Some(o),
            Term::Ret(o) => o.as_mut(),
            Term::Br(_) => None,
        }
    }

    /// Variables read by the terminator; a return also reads both states.
    pub fn reads(&self) -> Vec<String> {
        let mut v: Vec<String> = self.operand().and_then(|o| o.read_name()).into_iter().collect();
        if matches!(self, Term::Ret(_)) {
            v.push(MEM_VAR.into());
            v.push(IO_VAR.into());
        }
        v
    }
}

impl Cfg {
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.label == label)
    }

    pub fn label_map(&self) -> BTreeMap<String, usize> {
        self.blocks.iter().enumerate().map(|(i, b)| (b.label.clone(), i)).collect()
    }

    /// Successor indices of each block, in terminator order (duplicates kept).
    pub fn successors(&self) -> Vec<Vec<usize>> {
        let map = self.label_map();
        self.blocks.iter().map(|b| b.term.targets().iter().filter_map(|t| map.get(*t).copied()).collect()).collect()
    }

    /// Distinct predecessor indices of each block, ascending.
    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut preds = vec![BTreeSet::new(); self.blocks.len()];
        for (i, ss) in self.successors().iter().enumerate() {
            for &s in ss {
                preds[s].insert(i);
            }
        }
        preds.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Blocks reachable from the entry, as a mask.
    pub fn reachable(&self) -> Vec<bool> {
        let succ = self.successors();
        let mut seen = vec![false; self.blocks.len()];
        let mut stack = vec![0];
        while let Some(b) = stack.pop() {
            if b >= seen.len() || seen[b] {
                continue;
            }
            seen[b] = true;
            stack.extend(succ[b].iter().copied());
        }
        seen
    }

    /// Number of instructions, phis and terminators.
    pub fn instruction_count(&self) -> usize {
        self.blocks.iter().map(|b| b.phis.len() + b.insts.len() + 1).sum()
    }

    pub fn has_phis(&self) -> bool {
        self.blocks.iter().any(|b| !b.phis.is_empty())
    }

    /// A label not yet used in this CFG, derived from `base`.
    pub fn fresh_label(&self, base: &str) -> String {
        let used: BTreeSet<&str> = self.blocks.iter().map(|b| b.label.as_str()).collect();
        if !used.contains(base) {
            return base.to_string();
        }
        (0..).map(|i| format!("{base}.{i}")).find(|l| !used.contains(l.as_str())).unwrap()
    }
}

impl Module {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn global(&self, name: &str) -> Option<&Global> {
        self.globals.iter().find(|g| g.name == name)
    }

    /// Source-level type of the symbol `@name`: a function type or `ptr`.
    pub fn symbol_type(&self, name: &str) -> Option<Type> {
        if let Some(f) = self.function(name) {
            return Some(f.fn_type());
        }
        self.global(name).map(|_| Type::Ptr)
    }

    pub fn instruction_count(&self) -> usize {
        let f: usize = self.functions.iter().filter_map(|f| f.body.as_ref()).map(Cfg::instruction_count).sum();
        let g: usize = self.globals.iter().filter_map(|g| g.init.as_ref()).map(Cfg::instruction_count).sum();
        f + g
    }
}

impl Function {
    pub fn fn_type(&self) -> Type {
        Type::func(self.params.iter().map(|(_, t)| t.clone()).collect(), self.ret.iter().cloned().collect())
    }

    pub fn is_external(&self) -> bool {
        self.body.is_none()
    }
}
