//! Name resolution, typing and CFG-shape checks for source modules.

use super::dom::DomTree;
use super::*;
use std::collections::{BTreeMap, HashMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Structural and typing checks only.
    NonSsa,
    /// Additionally: single assignment and definitions dominating uses.
    Ssa,
}

struct Ctx<'a> {
    out: Vec<String>,
    who: &'a str,
    syms: Option<&'a dyn Fn(&str) -> Option<Type>>,
    vars: HashMap<String, Type>,
}

impl Ctx<'_> {
    fn err(&mut self, msg: String) {
        self.out.push(format!("@{}: {msg}", self.who));
    }

    fn operand(&mut self, o: &Operand, want: &Type, at: &str) {
        match o {
            Operand::Var(v) => match self.vars.get(v) {
                None => self.err(format!("{at}: undefined name %{v}")),
                Some(t) if t != want => self.err(format!("{at}: %{v} has type {t}, expected {want}")),
                _ => {}
            },
            Operand::Int(_) => {
                if !want.is_int() {
                    self.err(format!("{at}: integer literal where {want} expected"));
                }
            }
            Operand::Float(_) => {
                if *want != Type::F64 {
                    self.err(format!("{at}: float literal where {want} expected"));
                }
            }
            Operand::Sym(s) => {
                if let Some(syms) = self.syms {
                    match syms(s) {
                        None => self.err(format!("{at}: undefined name @{s}")),
                        Some(t) if t != *want => self.err(format!("{at}: @{s} has type {t}, expected {want}")),
                        _ => {}
                    }
                }
            }
            Operand::Undef => {}
        }
    }
}

struct Body<'a> {
    cfg: &'a Cfg,
    params: &'a [(String, Type)],
    ret: Option<&'a Type>,
    pure: bool,
}

fn check_body(b: &Body, who: &str, syms: Option<&dyn Fn(&str) -> Option<Type>>, mode: Mode) -> Vec<String> {
    let cfg = b.cfg;
    let mut c = Ctx { out: Vec::new(), who, syms, vars: HashMap::new() };
    if cfg.blocks.is_empty() {
        c.err("no blocks".into());
        return c.out;
    }
    // labels
    let mut labels: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, blk) in cfg.blocks.iter().enumerate() {
        if labels.insert(&blk.label, i).is_some() {
            c.err(format!("duplicate label {}", blk.label));
        }
    }
    for blk in &cfg.blocks {
        for t in blk.term.targets() {
            if !labels.contains_key(t) {
                c.err(format!("block {}: branch to undefined label %{t}", blk.label));
            }
        }
        if let Term::Branch(ty, _, ts) = &blk.term {
            if !ty.is_int() {
                c.err(format!("block {}: branch on non-integer type {ty}", blk.label));
            }
            if ts.is_empty() {
                c.err(format!("block {}: branch without targets", blk.label));
            }
        }
    }
    let preds = cfg.predecessors();
    if !preds[0].is_empty() {
        c.err(format!("entry block {} has predecessors", cfg.blocks[0].label));
    }
    // variable types
    let mut defs: HashMap<String, Vec<(usize, usize)>> = HashMap::new();
    for (p, t) in b.params {
        c.vars.insert(p.clone(), t.clone());
        defs.entry(p.clone()).or_default().push((usize::MAX, 0));
    }
    let mut declare = |c: &mut Ctx, v: &str, t: &Type, blk: usize, pos: usize| {
        if let Some(old) = c.vars.get(v) {
            if old != t {
                c.err(format!("%{v} defined with types {old} and {t}"));
            }
        } else {
            c.vars.insert(v.to_string(), t.clone());
        }
        defs.entry(v.to_string()).or_default().push((blk, pos));
    };
    for (bi, blk) in cfg.blocks.iter().enumerate() {
        for (pi, p) in blk.phis.iter().enumerate() {
            declare(&mut c, &p.dst, &p.ty, bi, pi);
        }
        for (ii, inst) in blk.insts.iter().enumerate() {
            match (&inst.dst, inst.kind.result_type()) {
                (Some(d), Some(t)) => declare(&mut c, d, &t, bi, blk.phis.len() + ii),
                (Some(d), None) => c.err(format!("block {}: %{d} assigned from an instruction without a value", blk.label)),
                _ => {}
            }
        }
    }
    // operand types
    for blk in &cfg.blocks {
        let at = format!("block {}", blk.label);
        for p in &blk.phis {
            let mut seen = std::collections::BTreeSet::new();
            for (o, l) in &p.incoming {
                c.operand(o, &p.ty, &at);
                if !seen.insert(l.as_str()) {
                    c.err(format!("{at}: phi %{} lists %{l} twice", p.dst));
                }
            }
            let want: std::collections::BTreeSet<&str> =
                preds[labels[blk.label.as_str()]].iter().map(|&i| cfg.blocks[i].label.as_str()).collect();
            if seen != want {
                c.err(format!("{at}: phi %{} incoming blocks do not match predecessors", p.dst));
            }
        }
        for inst in &blk.insts {
            let k = &inst.kind;
            if b.pure && k.touches_mem() {
                c.err(format!("{at}: initializer must be free of side effects"));
            }
            match k {
                InstKind::Bin(op, t, x, y) => {
                    if !(t.is_int() || (*t == Type::F64 && op.float_ok())) {
                        c.err(format!("{at}: {} undefined on {t}", op.name()));
                    }
                    c.operand(x, t, &at);
                    c.operand(y, t, &at);
                }
                InstKind::Cmp(_, t, x, y) => {
                    if !(t.is_int() || *t == Type::F64) {
                        c.err(format!("{at}: comparison on {t}"));
                    }
                    c.operand(x, t, &at);
                    c.operand(y, t, &at);
                }
                InstKind::Neg(t, x) => {
                    if !(t.is_int() || *t == Type::F64) {
                        c.err(format!("{at}: neg on {t}"));
                    }
                    c.operand(x, t, &at);
                }
                InstKind::Copy(t, x) => c.operand(x, t, &at),
                InstKind::Match(t, x, table) => {
                    if !t.is_int() {
                        c.err(format!("{at}: match on {t}"));
                    }
                    if table.k < 1 || table.default >= table.k || table.cases.iter().any(|(_, a)| *a >= table.k) {
                        c.err(format!("{at}: match target out of range"));
                    }
                    c.operand(x, t, &at);
                }
                InstKind::Alloca(t, n) => {
                    if *n == 0 || matches!(t, Type::Mem | Type::Io | Type::Ctl(_)) {
                        c.err(format!("{at}: bad alloca"));
                    }
                }
                InstKind::Load(t, p) => {
                    if !t.is_value() || matches!(t, Type::Ctl(_)) {
                        c.err(format!("{at}: load of {t}"));
                    }
                    c.operand(p, &Type::Ptr, &at);
                }
                InstKind::Store(t, v, p) => {
                    c.operand(v, t, &at);
                    c.operand(p, &Type::Ptr, &at);
                }
                InstKind::Gep(_, base, idx) => {
                    c.operand(base, &Type::Ptr, &at);
                    c.operand(idx, &Type::Int(64), &at);
                }
                InstKind::Call { ret, callee, args } => {
                    let ft = Type::func(args.iter().map(|(t, _)| t.clone()).collect(), ret.iter().cloned().collect());
                    c.operand(callee, &ft, &at);
                    for (t, a) in args {
                        c.operand(a, t, &at);
                    }
                }
            }
        }
        match &blk.term {
            Term::Branch(t, o, _) => c.operand(o, t, &at),
            Term::Ret(o) => match (o, b.ret) {
                (Some(o), Some(t)) => c.operand(o, t, &at),
                (None, None) => {}
                (Some(_), None) => c.err(format!("{at}: value returned from void function")),
                (None, Some(_)) => c.err(format!("{at}: missing return value")),
            },
            Term::Br(_) => {}
        }
    }
    if !cfg.blocks.iter().any(|b| matches!(b.term, Term::Ret(_))) {
        c.err("no return".into());
    }
    if mode == Mode::Ssa && c.out.is_empty() {
        ssa_checks(&mut c, cfg, &defs, &labels);
    }
    c.out
}

fn ssa_checks(c: &mut Ctx, cfg: &Cfg, defs: &HashMap<String, Vec<(usize, usize)>>, labels: &BTreeMap<&str, usize>) {
    let mut names: Vec<&String> = defs.keys().collect();
    names.sort();
    for v in names {
        if defs[v].len() > 1 {
            c.err(format!("%{v} assigned {} times", defs[v].len()));
        }
    }
    let succ = cfg.successors();
    let dom = DomTree::new(&succ, 0);
    // definition site dominates (block, pos)?
    let dominated = |v: &str, blk: usize, pos: usize| -> bool {
        let Some(ds) = defs.get(v) else { return false };
        let (db, dp) = ds[0];
        if db == usize::MAX {
            return true;
        }
        if db == blk {
            dp < pos
        } else {
            dom.dominates(db, blk)
        }
    };
    for (bi, blk) in cfg.blocks.iter().enumerate() {
        if !dom.reachable[bi] {
            continue;
        }
        for p in &blk.phis {
            for (o, l) in &p.incoming {
                if let Operand::Var(v) = o {
                    let pred = labels[l.as_str()];
                    if dom.reachable[pred] && !dominated(v, pred, usize::MAX) {
                        c.err(format!("block {}: phi operand %{v} not available from %{l}", blk.label));
                    }
                }
            }
        }
        let base = blk.phis.len();
        for (ii, inst) in blk.insts.iter().enumerate() {
            for o in inst.kind.operands() {
                if let Operand::Var(v) = o {
                    if !dominated(v, bi, base + ii) {
                        c.err(format!("block {}: use of %{v} not dominated by its definition", blk.label));
                    }
                }
            }
        }
        if let Some(Operand::Var(v)) = blk.term.operand() {
            if !dominated(v, bi, usize::MAX) {
                c.err(format!("block {}: use of %{v} not dominated by its definition", blk.label));
            }
        }
    }
}

/// Check a single function body without resolving global symbols.
pub fn validate_cfg(f: &Function, mode: Mode) -> Vec<String> {
    match &f.body {
        None => Vec::new(),
        Some(cfg) => check_body(&Body { cfg, params: &f.params, ret: f.ret.as_ref(), pure: false }, &f.name, None, mode),
    }
}

/// Check names, symbol references, types and every body.
pub fn validate_module(m: &Module, mode: Mode) -> Vec<String> {
    let mut out = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for n in m.globals.iter().map(|g| &g.name).chain(m.functions.iter().map(|f| &f.name)) {
        if !seen.insert(n) {
            out.push(format!("duplicate definition of @{n}"));
        }
    }
    let syms = |s: &str| m.symbol_type(s);
    for g in &m.globals {
        if !g.ty.is_value() || matches!(g.ty, Type::Ctl(_)) {
            out.push(format!("@{}: bad global type {}", g.name, g.ty));
        }
        if let Some(cfg) = &g.init {
            out.extend(check_body(&Body { cfg, params: &[], ret: Some(&g.ty), pure: true }, &g.name, Some(&syms), mode));
        } else if g.exported {
            out.push(format!("@{}: external data cannot be exported", g.name));
        }
    }
    for f in &m.functions {
        if let Some(cfg) = &f.body {
            out.extend(check_body(&Body { cfg, params: &f.params, ret: f.ret.as_ref(), pure: false }, &f.name, Some(&syms), mode));
        }
    }
    out
}
