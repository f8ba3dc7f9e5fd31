//! Translation of annotated control trees into λ and δ regions.

use super::structure::{Tree, TreeKind};
use super::ConstructError;
use crate::graph::{Graph, Lit, MatchTable, Op, Origin, RegionId};
use crate::source::{Cfg, InstKind, Operand, Term, IO_VAR, MEM_VAR};
use crate::types::{FnSig, Type};
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Pending branch predicate left by a block terminator for the following
/// branch or loop node.
struct Pending {
    origin: Origin,
    ty: Type,
    targets: Vec<usize>,
}

fn edit<T>(func: &str, r: crate::graph::EditResult<T>) -> Result<T, ConstructError> {
    r.map_err(|e| ConstructError::Graph { func: func.to_string(), msg: e.to_string() })
}

/// Variable-to-origin map for the region under construction.
pub type SymbolTable = HashMap<String, Origin>;

pub struct Translator<'a> {
    pub g: &'a mut Graph,
    cfg: &'a Cfg,
    func: &'a str,
    types: &'a BTreeMap<String, Type>,
    stateless: bool,
    symtab: SymbolTable,
    pending: Option<Pending>,
    /// Integer produced from a match, mapped to the control value it came from.
    match_cache: HashMap<Origin, Origin>,
    /// Region whose results the `ret` terminator sets.
    outer: RegionId,
}

impl<'a> Translator<'a> {
    pub fn new(
        g: &'a mut Graph,
        cfg: &'a Cfg,
        func: &'a str,
        types: &'a BTreeMap<String, Type>,
        stateless: bool,
        outer: RegionId,
        symtab: SymbolTable,
    ) -> Translator<'a> {
        Translator { g, cfg, func, types, stateless, symtab, pending: None, match_cache: HashMap::new(), outer }
    }

    fn missing(&self, var: &str) -> ConstructError {
        ConstructError::Missing { func: self.func.to_string(), var: var.to_string() }
    }

    fn lookup(&self, var: &str) -> Result<Origin, ConstructError> {
        self.symtab.get(var).copied().ok_or_else(|| self.missing(var))
    }

    fn demanded<'s>(&self, set: &'s BTreeSet<String>) -> Vec<&'s String> {
        set.iter().filter(|v| !(self.stateless && v.starts_with('!'))).collect()
    }

    /// Seed undefined values for every demanded variable not yet bound.
    pub fn seed_undefined(&mut self, r: RegionId, demand: &BTreeSet<String>) -> Result<(), ConstructError> {
        for v in demand {
            if self.symtab.contains_key(v) || (self.stateless && v.starts_with('!')) {
                continue;
            }
            let ty = self.types.get(v).ok_or_else(|| self.missing(v))?.lower();
            let o = edit(self.func, self.g.simple_out(r, Op::Undef(ty), &[]))?;
            self.symtab.insert(v.clone(), o);
        }
        Ok(())
    }

    fn operand(&mut self, r: RegionId, o: &Operand, ty: &Type) -> Result<Origin, ConstructError> {
        Ok(match o {
            Operand::Var(v) => self.lookup(v)?,
            Operand::Sym(s) => self.lookup(&format!("@{s}"))?,
            Operand::Int(i) => match ty {
                Type::Int(w) => self.g.add_const(r, Lit::int(*w, *i)),
                Type::F64 => self.g.add_const(r, Lit::f64(*i as f64)),
                t => edit(self.func, self.g.simple_out(r, Op::Undef(t.lower()), &[]))?,
            },
            Operand::Float(f) => self.g.add_const(r, Lit::f64(*f)),
            Operand::Undef => edit(self.func, self.g.simple_out(r, Op::Undef(ty.lower()), &[]))?,
        })
    }

    fn simple(&mut self, r: RegionId, op: Op, inputs: &[Origin]) -> Result<crate::graph::NodeId, ConstructError> {
        edit(self.func, self.g.add_simple(r, op, inputs))
    }

    fn translate_block(&mut self, r: RegionId, b: usize) -> Result<(), ConstructError> {
        let cfg = self.cfg;
        let block = &cfg.blocks[b];
        let ptr = Type::Ptr;
        let i64t = Type::Int(64);
        for inst in &block.insts {
            let value: Option<Origin> = match &inst.kind {
                InstKind::Bin(op, t, a, c) => {
                    let (a, c) = (self.operand(r, a, t)?, self.operand(r, c, t)?);
                    Some(Origin::Out(self.simple(r, Op::Bin(*op, t.clone()), &[a, c])?, 0))
                }
                InstKind::Neg(t, a) => {
                    let a = self.operand(r, a, t)?;
                    Some(Origin::Out(self.simple(r, Op::Neg(t.clone()), &[a])?, 0))
                }
                InstKind::Cmp(op, t, a, c) => {
                    let (a, c) = (self.operand(r, a, t)?, self.operand(r, c, t)?);
                    Some(Origin::Out(self.simple(r, Op::Cmp(*op, t.clone()), &[a, c])?, 0))
                }
                InstKind::Copy(t, a) => Some(self.operand(r, a, t)?),
                InstKind::Match(t, x, table) => Some(self.translate_match(r, t, x, table)?),
                InstKind::Alloca(t, n) => {
                    let mem = self.lookup(MEM_VAR)?;
                    let node = self.simple(r, Op::Alloca { elem: t.clone(), count: *n }, &[mem])?;
                    self.symtab.insert(MEM_VAR.into(), Origin::Out(node, 1));
                    Some(Origin::Out(node, 0))
                }
                InstKind::Load(t, p) => {
                    let p = self.operand(r, p, &ptr)?;
                    let mem = self.lookup(MEM_VAR)?;
                    let node = self.simple(r, Op::Load(t.clone()), &[p, mem])?;
                    self.symtab.insert(MEM_VAR.into(), Origin::Out(node, 1));
                    Some(Origin::Out(node, 0))
                }
                InstKind::Store(t, v, p) => {
                    let p = self.operand(r, p, &ptr)?;
                    let v = self.operand(r, v, t)?;
                    let mem = self.lookup(MEM_VAR)?;
                    let node = self.simple(r, Op::Store(t.clone()), &[p, v, mem])?;
                    self.symtab.insert(MEM_VAR.into(), Origin::Out(node, 0));
                    None
                }
                InstKind::Gep(t, base, x) => {
                    let (base, x) = (self.operand(r, base, &ptr)?, self.operand(r, x, &i64t)?);
                    Some(Origin::Out(self.simple(r, Op::Gep(t.clone()), &[base, x])?, 0))
                }
                InstKind::Call { ret, callee, args } => {
                    let src_sig = FnSig { params: args.iter().map(|(t, _)| t.clone()).collect(), results: ret.iter().cloned().collect() };
                    let callee = self.operand(r, callee, &Type::Fn(src_sig.clone().into()))?;
                    let mut ins = vec![callee];
                    for (t, a) in args {
                        ins.push(self.operand(r, a, t)?);
                    }
                    ins.push(self.lookup(MEM_VAR)?);
                    ins.push(self.lookup(IO_VAR)?);
                    let node = self.simple(r, Op::Apply(src_sig.lower().into()), &ins)?;
                    let nv = ret.is_some() as u32;
                    self.symtab.insert(MEM_VAR.into(), Origin::Out(node, nv));
                    self.symtab.insert(IO_VAR.into(), Origin::Out(node, nv + 1));
                    ret.as_ref().map(|_| Origin::Out(node, 0))
                }
            };
            if let (Some(d), Some(v)) = (&inst.dst, value) {
                self.symtab.insert(d.clone(), v);
            }
        }
        match &block.term {
            Term::Br(_) => {}
            Term::Branch(ty, op, targets) => {
                let origin = self.operand(r, op, ty)?;
                let labels = cfg.label_map();
                let targets = targets.iter().map(|l| labels[l]).collect();
                self.pending = Some(Pending { origin, ty: ty.clone(), targets });
            }
            Term::Ret(op) => {
                let mut results = Vec::new();
                if let Some(op) = op {
                    let ty = self.g.region(self.outer).results[0].ty.raise();
                    results.push(self.operand(r, op, &ty)?);
                }
                if !self.stateless {
                    results.push(self.lookup(MEM_VAR)?);
                    results.push(self.lookup(IO_VAR)?);
                }
                for (i, o) in results.into_iter().enumerate() {
                    edit(self.func, self.g.set_result(self.outer, i, o))?;
                }
            }
        }
        Ok(())
    }

    /// A source `match` yields an integer; it becomes a match producing a
    /// control value and a γ selecting the corresponding constant.
    fn translate_match(&mut self, r: RegionId, t: &Type, x: &Operand, table: &MatchTable) -> Result<Origin, ConstructError> {
        let ity = Type::narrowest_int(table.k);
        let Type::Int(w) = ity else { unreachable!() };
        let x = self.operand(r, x, t)?;
        if table.k < 2 {
            return Ok(self.g.add_const(r, Lit::int(w, 0)));
        }
        let ctl = Origin::Out(self.simple(r, Op::Match { ty: t.clone(), table: table.clone() }, &[x])?, 0);
        let gamma = edit(self.func, self.g.add_gamma(r, ctl, table.k))?;
        let subs = self.g.subregions(gamma).to_vec();
        let consts: Vec<Origin> = subs.iter().enumerate().map(|(i, &s)| self.g.add_const(s, Lit::int(w, i as i64))).collect();
        let l = edit(self.func, self.g.add_exit_var(gamma, &consts))?;
        let out = Origin::Out(gamma, l as u32);
        self.match_cache.insert(out, ctl);
        Ok(out)
    }

    /// Control value for a pending branch, reusing a match result when the
    /// branch tests the integer that match produced.
    fn predicate(&mut self, r: RegionId, p: &Pending, table: MatchTable) -> Result<Origin, ConstructError> {
        if let Some(&ctl) = self.match_cache.get(&p.origin) {
            let k = match self.g.origin_ty(ctl) {
                Type::Ctl(k) => *k,
                _ => 0,
            };
            if table == MatchTable::identity(k) {
                return Ok(ctl);
            }
        }
        Ok(Origin::Out(self.simple(r, Op::Match { ty: p.ty.clone(), table }, &[p.origin])?, 0))
    }

    pub fn translate(&mut self, r: RegionId, t: &Tree) -> Result<(), ConstructError> {
        match t.kind {
            TreeKind::Block(b) => self.translate_block(r, b),
            TreeKind::Linear => t.children.iter().try_for_each(|c| self.translate(r, c)),
            TreeKind::Branch => {
                let p = self.pending.take().ok_or_else(|| ConstructError::Unstructured("branch node without predicate".into()))?;
                let k = t.children.len() as u32;
                let pred = self.predicate(r, &p, MatchTable::identity(k))?;
                let gamma = edit(self.func, self.g.add_gamma(r, pred, k))?;
                let subs = self.g.subregions(gamma).to_vec();
                let inputs = self.demanded(&t.demand);
                let mut inner = SymbolTable::new();
                for v in inputs {
                    let l = edit(self.func, self.g.add_entry_var(gamma, self.lookup(v)?))?;
                    inner.insert(v.clone(), Origin::Arg(subs[0], l as u32));
                }
                let saved = std::mem::take(&mut self.symtab);
                let mut tables = Vec::new();
                for (i, c) in t.children.iter().enumerate() {
                    self.symtab = inner
                        .iter()
                        .map(|(v, o)| (v.clone(), if let Origin::Arg(_, l) = o { Origin::Arg(subs[i], *l) } else { *o }))
                        .collect();
                    self.translate(subs[i], c)?;
                    tables.push(std::mem::take(&mut self.symtab));
                }
                self.symtab = saved;
                for v in self.demanded(&t.demand_out) {
                    let origins =
                        tables.iter().map(|tb| tb.get(v).copied().ok_or_else(|| self.missing(v))).collect::<Result<Vec<_>, _>>()?;
                    let l = edit(self.func, self.g.add_exit_var(gamma, &origins))?;
                    self.symtab.insert(v.clone(), Origin::Out(gamma, l as u32));
                }
                Ok(())
            }
            TreeKind::Loop => {
                let theta = self.g.add_theta(r);
                let body = self.g.subregions(theta)[0];
                let vars: Vec<String> = self.demanded(&t.demand).into_iter().cloned().collect();
                let mut inner = SymbolTable::new();
                for v in &vars {
                    let l = edit(self.func, self.g.add_loop_var(theta, self.lookup(v)?))?;
                    inner.insert(v.clone(), Origin::Arg(body, l as u32));
                }
                let saved = std::mem::replace(&mut self.symtab, inner);
                self.translate(body, &t.children[0])?;
                let p = self.pending.take().ok_or_else(|| ConstructError::Unstructured("loop without tail predicate".into()))?;
                let head = t.first_block();
                if p.targets.len() != 2 || !p.targets.contains(&head) {
                    return Err(ConstructError::Unstructured("loop tail does not branch to its head".into()));
                }
                let table = MatchTable { cases: vec![(0, (p.targets[0] == head) as u32)], default: (p.targets[1] == head) as u32, k: 2 };
                let pred = self.predicate(body, &p, table)?;
                edit(self.func, self.g.set_result(body, 0, pred))?;
                for (l, v) in vars.iter().enumerate() {
                    let o = self.lookup(v)?;
                    edit(self.func, self.g.set_result(body, l + 1, o))?;
                }
                self.symtab = saved;
                for (l, v) in vars.iter().enumerate() {
                    self.symtab.insert(v.clone(), Origin::Out(theta, l as u32));
                }
                Ok(())
            }
        }
    }
}
