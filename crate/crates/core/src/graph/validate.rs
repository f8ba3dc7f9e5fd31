//! Structural validation. Violations are returned as data; all of them are
//! collected rather than stopping at the first.

use super::topo::topological_order;
use super::{Graph, NodeId, NodeKind, Op, Origin, RegionId, User};
use crate::types::Type;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

struct Checker<'a> {
    g: &'a Graph,
    out: Vec<Violation>,
}

impl Checker<'_> {
    fn err(&mut self, location: impl ToString, message: impl Into<String>) {
        self.out.push(Violation { location: location.to_string(), message: message.into() });
    }

    fn origin_exists(&self, o: Origin) -> bool {
        match o {
            Origin::Arg(r, i) => self.g.has_region(r) && (i as usize) < self.g.region(r).args.len(),
            Origin::Out(n, i) => self.g.has_node(n) && (i as usize) < self.g.node(n).outputs.len(),
        }
    }

    fn check_sink(&mut self, u: User, region: RegionId) {
        let g = self.g;
        let ty = g.user_ty(u).clone();
        let Some(o) = g.user_origin(u) else {
            self.err(u, "has no origin");
            return;
        };
        if !self.origin_exists(o) {
            self.err(u, format!("dangling origin {o}"));
            return;
        }
        if g.origin_region(o) != region {
            self.err(u, format!("origin {o} lives in {}, user in {region}", g.origin_region(o)));
        }
        if *g.origin_ty(o) != ty {
            self.err(u, format!("type {ty} differs from origin type {}", g.origin_ty(o)));
        }
        let n = g.users(o).iter().filter(|x| **x == u).count();
        if n != 1 {
            self.err(u, format!("listed {n} times among users of {o}"));
        }
    }

    fn check_port_users(&mut self, o: Origin) {
        let g = self.g;
        for &u in g.users(o) {
            let ok = match u {
                User::In(n, i) => g.has_node(n) && (i as usize) < g.node(n).inputs.len(),
                User::Res(r, i) => g.has_region(r) && (i as usize) < g.region(r).results.len(),
            };
            if !ok || g.user_origin(u) != Some(o) {
                self.err(o, format!("stale user {u}"));
            }
        }
    }

    fn types_eq(&mut self, loc: impl ToString, what: &str, a: &[Type], b: &[Type]) {
        if a != b {
            let f = |v: &[Type]| v.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ");
            self.err(loc, format!("{what}: ({}) vs ({})", f(a), f(b)));
        }
    }

    fn region(&mut self, r: RegionId) {
        let g = self.g;
        let reg = g.region(r);
        match reg.owner {
            None if r != g.root() => self.err(r, "non-root region without owner"),
            Some((n, i)) => {
                if !g.has_node(n) || g.node(n).regions.get(i as usize) != Some(&r) {
                    self.err(r, format!("owner {n}[{i}] does not list this region"));
                }
            }
            None => {}
        }
        // nesting must terminate at the root
        let mut cur = r;
        let mut steps = 0;
        while let Some((n, _)) = g.region(cur).owner {
            if !g.has_node(n) {
                break;
            }
            cur = g.parent(n);
            steps += 1;
            if steps > g.region_capacity() {
                self.err(r, "cyclic region nesting");
                break;
            }
        }
        for (i, a) in reg.args.iter().enumerate() {
            if !a.ty.well_formed() {
                self.err(Origin::Arg(r, i as u32), format!("ill-formed type {}", a.ty));
            }
            self.check_port_users(Origin::Arg(r, i as u32));
        }
        for i in 0..reg.results.len() {
            self.check_sink(User::Res(r, i as u32), r);
        }
        for &n in &reg.nodes {
            if !g.has_node(n) {
                self.err(r, format!("lists removed node {n}"));
                continue;
            }
            if g.parent(n) != r {
                self.err(n, format!("parent is {}, listed in {r}", g.parent(n)));
            }
            self.node(n);
        }
        if let Err(c) = topological_order(g, r) {
            self.err(r, format!("cycle among {c:?}"));
        }
    }

    fn node(&mut self, n: NodeId) {
        let g = self.g;
        let node = g.node(n);
        let r = node.parent;
        for i in 0..node.inputs.len() {
            self.check_sink(User::In(n, i as u32), r);
        }
        for (i, p) in node.outputs.iter().enumerate() {
            if !p.ty.well_formed() {
                self.err(Origin::Out(n, i as u32), format!("ill-formed type {}", p.ty));
            }
            self.check_port_users(Origin::Out(n, i as u32));
        }
        let ins: Vec<Type> = node.inputs.iter().map(|s| s.ty.clone()).collect();
        let outs: Vec<Type> = node.outputs.iter().map(|p| p.ty.clone()).collect();
        let subs = &node.regions;
        let args = |i: usize| -> Vec<Type> { g.region(subs[i]).args.iter().map(|p| p.ty.clone()).collect() };
        let ress = |i: usize| -> Vec<Type> { g.region(subs[i]).results.iter().map(|s| s.ty.clone()).collect() };
        let one_region = |c: &mut Self| {
            if subs.len() != 1 {
                c.err(n, format!("expected one subregion, found {}", subs.len()));
                false
            } else {
                true
            }
        };
        match &node.kind {
            NodeKind::Simple(op) => {
                if !subs.is_empty() {
                    self.err(n, "simple node owns regions");
                }
                self.types_eq(n, "input signature", &ins, &op.input_types());
                self.types_eq(n, "output signature", &outs, &op.output_types());
                match op {
                    Op::Match { ty, table } => {
                        if !ty.is_int() {
                            self.err(n, "match input must be an integer");
                        }
                        if table.k < 1 || table.default >= table.k || table.cases.iter().any(|(_, a)| *a >= table.k) {
                            self.err(n, "match table targets out of range");
                        }
                    }
                    Op::Bin(b, t) => {
                        if !(t.is_int() || (*t == Type::F64 && b.float_ok())) {
                            self.err(n, format!("{} undefined on {t}", b.name()));
                        }
                    }
                    Op::Neg(t) | Op::Cmp(_, t) => {
                        if !(t.is_int() || *t == Type::F64) {
                            self.err(n, format!("arithmetic on {t}"));
                        }
                    }
                    Op::Undef(t) if matches!(t, Type::Ctl(_)) || t.is_state() => {
                        self.err(n, "undef of control or state type");
                    }
                    _ => {}
                }
            }
            NodeKind::Gamma => {
                let k = subs.len();
                if k < 2 {
                    self.err(n, format!("gamma with {k} subregions"));
                }
                if ins.first() != Some(&Type::Ctl(k as u32)) {
                    self.err(n, format!("predicate must be ctl{k}"));
                }
                for i in 0..k {
                    self.types_eq(g.node(n).regions[i], "entry variables", &args(i), ins.get(1..).unwrap_or(&[]));
                    self.types_eq(g.node(n).regions[i], "exit variables", &ress(i), &outs);
                }
            }
            NodeKind::Theta => {
                if one_region(self) {
                    self.types_eq(n, "loop variable inputs/outputs", &ins, &outs);
                    self.types_eq(n, "loop variable arguments", &args(0), &ins);
                    let res = ress(0);
                    if res.first() != Some(&Type::Ctl(2)) {
                        self.err(n, "theta result 0 must be ctl2");
                    }
                    self.types_eq(n, "loop variable results", res.get(1..).unwrap_or(&[]), &ins);
                }
            }
            NodeKind::Lambda { sig, .. } => {
                if one_region(self) {
                    if outs != vec![Type::Fn(sig.clone())] {
                        self.err(n, "lambda must have one output of its function type");
                    }
                    let mut want = ins.clone();
                    want.extend(sig.params.iter().cloned());
                    self.types_eq(n, "lambda arguments", &args(0), &want);
                    self.types_eq(n, "lambda results", &ress(0), &sig.results);
                }
            }
            NodeKind::Delta { ty, .. } => {
                if one_region(self) {
                    if outs != vec![Type::Ptr] {
                        self.err(n, "delta must have one pointer output");
                    }
                    self.types_eq(n, "delta arguments", &args(0), &ins);
                    self.types_eq(n, "delta result", &ress(0), std::slice::from_ref(ty));
                }
            }
            NodeKind::Phi => {
                if one_region(self) {
                    let mut want = ins.clone();
                    want.extend(outs.iter().cloned());
                    self.types_eq(n, "phi arguments", &args(0), &want);
                    self.types_eq(n, "phi results", &ress(0), &outs);
                    for &m in &g.region(subs[0]).nodes {
                        if !matches!(g.kind(m), NodeKind::Lambda { .. } | NodeKind::Delta { .. }) {
                            self.err(m, "phi region may only contain lambda and delta nodes");
                        }
                    }
                }
            }
        }
        for &s in subs {
            if !g.has_region(s) {
                self.err(n, format!("dangling subregion {s}"));
            }
        }
    }
}

/// Check every structural invariant of `g`.
pub fn validate(g: &Graph) -> Vec<Violation> {
    let mut c = Checker { g, out: Vec::new() };
    let root = g.root();
    if g.imports.len() != g.region(root).args.len() {
        c.err(root, "import names out of sync with root arguments");
    }
    if g.exports.len() != g.region(root).results.len() {
        c.err(root, "export names out of sync with root results");
    }
    let mut names = std::collections::BTreeSet::new();
    for e in &g.exports {
        if !names.insert(e) {
            c.err(root, format!("duplicate export {e}"));
        }
    }
    for r in g.region_ids().collect::<Vec<_>>() {
        c.region(r);
    }
    c.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Lit, MatchTable};
    use crate::types::{FnSig, I64};

    #[test]
    fn empty_graph_is_valid() {
        assert!(validate(&Graph::new()).is_empty());
    }

    #[test]
    fn gamma_result_count_mismatch() {
        let mut g = Graph::new();
        let root = g.root();
        let x = g.add_const(root, Lit::int(64, 0));
        let p = g.simple_out(root, Op::Match { ty: I64, table: MatchTable::identity(2) }, &[x]).unwrap();
        let gm = g.add_gamma(root, p, 2).unwrap();
        g.add_entry_var(gm, x).unwrap();
        let rs = g.subregions(gm).to_vec();
        g.add_exit_var(gm, &[Origin::Arg(rs[0], 0), Origin::Arg(rs[1], 0)]).unwrap();
        g.remove_result(rs[1], 0);
        let v = validate(&g);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].message.contains("exit variables"));
    }

    /// Two functions: `max` and a caller that applies it and an external output routine.
    #[test]
    fn two_lambdas_with_applies() {
        let mut g = Graph::new();
        let root = g.root();
        let puts = g.add_import("puts", Type::func(vec![Type::Ptr], vec![]));
        let max_sig = FnSig { params: vec![I64, I64], results: vec![I64] }.lower();
        let max = g.add_lambda(root, "max", max_sig.clone());
        let mb = g.subregions(max)[0];
        let (a, b) = (Origin::Arg(mb, 0), Origin::Arg(mb, 1));
        let gt = g.simple_out(mb, Op::Cmp(crate::graph::CmpOp::Gt, I64), &[a, b]).unwrap();
        let p = g.simple_out(mb, Op::Match { ty: Type::Int(1), table: MatchTable::identity(2) }, &[gt]).unwrap();
        let gm = g.add_gamma(mb, p, 2).unwrap();
        g.add_entry_var(gm, a).unwrap();
        g.add_entry_var(gm, b).unwrap();
        let rs = g.subregions(gm).to_vec();
        g.add_exit_var(gm, &[Origin::Arg(rs[0], 1), Origin::Arg(rs[1], 0)]).unwrap();
        g.set_result(mb, 0, Origin::Out(gm, 0)).unwrap();
        g.set_result(mb, 1, Origin::Arg(mb, 2)).unwrap();
        g.set_result(mb, 2, Origin::Arg(mb, 3)).unwrap();

        let f_sig = FnSig { params: vec![I64, I64], results: vec![] }.lower();
        let f = g.add_lambda(root, "f", f_sig);
        g.add_context_var(f, Origin::Out(max, 0)).unwrap();
        g.add_context_var(f, puts).unwrap();
        let fb = g.subregions(f)[0];
        let call = g
            .add_simple(
                fb,
                Op::Apply(std::sync::Arc::new(max_sig)),
                &[Origin::Arg(fb, 0), Origin::Arg(fb, 2), Origin::Arg(fb, 3), Origin::Arg(fb, 4), Origin::Arg(fb, 5)],
            )
            .unwrap();
        let _ = call;
        let puts_sig = match g.origin_ty(puts).clone() {
            Type::Fn(s) => s,
            _ => unreachable!(),
        };
        let alloca = g.add_simple(fb, Op::Alloca { elem: Type::Int(8), count: 4 }, &[Origin::Out(call, 1)]).unwrap();
        let call2 = g
            .add_simple(
                fb,
                Op::Apply(puts_sig),
                &[Origin::Arg(fb, 1), Origin::Out(alloca, 0), Origin::Out(alloca, 1), Origin::Out(call, 2)],
            )
            .unwrap();
        g.set_result(fb, 0, Origin::Out(call2, 0)).unwrap();
        g.set_result(fb, 1, Origin::Out(call2, 1)).unwrap();
        g.add_export("f", Origin::Out(f, 0)).unwrap();
        assert_eq!(validate(&g), vec![]);
    }

    #[test]
    fn unset_result_is_reported() {
        let mut g = Graph::new();
        let root = g.root();
        g.add_theta(root);
        assert_eq!(validate(&g).len(), 1);
    }
}
