//! Structured control-flow recovery: lowering one λ or δ region to a CFG.
//!
//! Simple nodes become instructions in topological order. A γ becomes a
//! k-way branch on its predicate with one block sequence per alternative,
//! all meeting in a join block. A θ becomes a do-while loop: loop variables
//! live in variables that are assigned in parallel at the end of the body,
//! and the back edge is taken on predicate 1. State edges emit nothing; they
//! only order the instructions through the topological sort. Control values
//! are integers of the narrowest type covering their alternative count.
//!
//! The output assigns loop and exit variables more than once, so it is not
//! in SSA form.

use crate::graph::ops::sext;
use crate::graph::topo::topo;
use crate::graph::views;
use crate::graph::{Graph, Lit, NodeId, NodeKind, Op, Origin, RegionId};
use crate::source::{Block, Cfg, Inst, InstKind, Operand, Term};
use crate::types::Type;
use std::collections::HashMap;

/// Names every origin is bound to while lowering.
pub type Env = HashMap<Origin, Operand>;

struct Lowering<'g> {
    g: &'g Graph,
    blocks: Vec<Block>,
    /// Index of the block being filled.
    cur: usize,
    env: Env,
}

fn lit_operand(l: &Lit) -> Operand {
    match *l {
        Lit::Int { width, bits } => Operand::Int(sext(width, bits)),
        Lit::F64(b) => Operand::Float(f64::from_bits(b)),
    }
}

fn var(name: String) -> Operand {
    Operand::Var(name)
}

impl Lowering<'_> {
    fn new_block(&mut self, label: String) -> usize {
        self.blocks.push(Block { label, phis: Vec::new(), insts: Vec::new(), term: Term::Ret(None) });
        self.blocks.len() - 1
    }

    fn label(&self, b: usize) -> String {
        self.blocks[b].label.clone()
    }

    fn emit(&mut self, dst: Option<String>, kind: InstKind) {
        self.blocks[self.cur].insts.push(Inst { dst, kind });
    }

    fn terminate(&mut self, term: Term) {
        self.blocks[self.cur].term = term;
    }

    fn op(&self, o: Origin) -> Operand {
        self.env.get(&o).cloned().unwrap_or_else(|| panic!("origin {o} lowered before its definition"))
    }

    fn bind(&mut self, o: Origin, name: &str) -> String {
        self.env.insert(o, var(name.to_string()));
        name.to_string()
    }

    fn copy(&mut self, dst: &str, ty: &Type, src: Operand) {
        self.emit(Some(dst.to_string()), InstKind::Copy(ty.raise(), src));
    }

    fn region(&mut self, r: RegionId) {
        for n in topo(self.g, r) {
            match self.g.kind(n) {
                NodeKind::Simple(op) => self.simple(n, op),
                NodeKind::Gamma => self.gamma(n),
                NodeKind::Theta => self.theta(n),
                k => panic!("{} inside a function body", k.name()),
            }
        }
    }

    fn simple(&mut self, n: NodeId, op: &Op) {
        let ins: Vec<Operand> = self.g.inputs(n).iter().filter(|o| self.g.origin_ty(**o).is_value()).map(|&o| self.op(o)).collect();
        let out0 = Origin::Out(n, 0);
        let name = format!("v{}", n.0);
        let kind = match op {
            Op::Const(l) => {
                self.env.insert(out0, lit_operand(l));
                return;
            }
            Op::Undef(_) => {
                self.env.insert(out0, Operand::Undef);
                return;
            }
            Op::Bin(b, t) => InstKind::Bin(*b, t.clone(), ins[0].clone(), ins[1].clone()),
            Op::Neg(t) => InstKind::Neg(t.clone(), ins[0].clone()),
            Op::Cmp(c, t) => InstKind::Cmp(*c, t.clone(), ins[0].clone(), ins[1].clone()),
            Op::Match { ty, table } => InstKind::Match(ty.clone(), ins[0].clone(), table.clone()),
            Op::Alloca { elem, count } => InstKind::Alloca(elem.clone(), *count),
            Op::Load(t) => InstKind::Load(t.clone(), ins[0].clone()),
            Op::Store(t) => InstKind::Store(t.clone(), ins[1].clone(), ins[0].clone()),
            Op::Gep(t) => InstKind::Gep(t.clone(), ins[0].clone(), ins[1].clone()),
            Op::Apply(sig) => {
                let src = sig.raise();
                let args = src.params.iter().cloned().zip(ins[1..].iter().cloned()).collect();
                InstKind::Call { ret: src.results.first().cloned(), callee: ins[0].clone(), args }
            }
        };
        let dst = if kind.result_type().is_some() { Some(self.bind(out0, &name)) } else { None };
        self.emit(dst, kind);
    }

    fn gamma(&mut self, n: NodeId) {
        let g = self.g;
        let k = g.subregions(n).len();
        let pred = self.op(g.input(n, 0));
        let outs: Vec<(Origin, Type, String)> = (0..g.num_outputs(n))
            .map(|l| {
                let o = Origin::Out(n, l as u32);
                (o, g.origin_ty(o).clone(), format!("g{}_{l}", n.0))
            })
            .filter(|(_, t, _)| t.is_value())
            .collect();
        let join_label = format!("join{}", n.0);
        let from = self.cur;
        let mut alts = Vec::new();
        for (i, &r) in g.subregions(n).iter().enumerate() {
            let b = self.new_block(format!("alt{}_{i}", n.0));
            alts.push(self.label(b));
            self.cur = b;
            for l in 0..views::num_entry_vars(g, n) {
                let v = self.op_or_state(g.input(n, l + 1));
                if let Some(v) = v {
                    self.env.insert(Origin::Arg(r, l as u32), v);
                }
            }
            self.region(r);
            for (o, ty, name) in &outs {
                let Origin::Out(_, l) = o else { unreachable!() };
                let res = self.op(g.result(r, *l as usize).expect("complete gamma"));
                self.copy(name, ty, res);
            }
            self.terminate(Term::Br(join_label.clone()));
        }
        self.blocks[from].term = Term::Branch(Type::narrowest_int(k as u32), pred, alts);
        let join = self.new_block(join_label);
        self.cur = join;
        for (o, _, name) in outs {
            self.bind(o, &name);
        }
    }

    /// Operand for a value origin; `None` for states.
    fn op_or_state(&self, o: Origin) -> Option<Operand> {
        self.g.origin_ty(o).is_value().then(|| self.op(o))
    }

    fn theta(&mut self, n: NodeId) {
        let g = self.g;
        let body = g.subregions(n)[0];
        let lv = views::num_loop_vars(g, n);
        let vars: Vec<Option<(String, Type)>> = (0..lv)
            .map(|l| {
                let ty = g.origin_ty(Origin::Out(n, l as u32)).clone();
                ty.is_value().then(|| (format!("l{}_{l}", n.0), ty))
            })
            .collect();
        for (l, v) in vars.iter().enumerate() {
            if let Some((name, ty)) = v {
                let init = self.op(g.input(n, l));
                self.copy(name, ty, init);
                self.env.insert(Origin::Arg(body, l as u32), var(name.clone()));
            }
        }
        let head_label = format!("loop{}", n.0);
        self.terminate(Term::Br(head_label.clone()));
        let head = self.new_block(head_label.clone());
        self.cur = head;
        self.region(body);
        // Parallel assignment of the loop variables: save those that other
        // results read before overwriting them.
        let results: Vec<Option<Operand>> =
            (0..lv).map(|l| vars[l].as_ref().map(|_| self.op(g.result(body, l + 1).expect("complete theta")))).collect();
        let mut saved: HashMap<String, String> = HashMap::new();
        for (l, v) in vars.iter().enumerate() {
            let Some((name, ty)) = v else { continue };
            let read_elsewhere = results.iter().enumerate().any(|(j, r)| j != l && *r == Some(var(name.clone())));
            if read_elsewhere {
                let tmp = format!("t{}_{l}", n.0);
                self.copy(&tmp, ty, var(name.clone()));
                saved.insert(name.clone(), tmp);
            }
        }
        for (l, v) in vars.iter().enumerate() {
            let Some((name, ty)) = v else { continue };
            let mut r = results[l].clone().unwrap();
            if r == var(name.clone()) {
                continue;
            }
            if let Operand::Var(x) = &r {
                if let Some(t) = saved.get(x) {
                    r = var(t.clone());
                }
            }
            self.copy(name, ty, r);
        }
        let pred = self.op(g.result(body, 0).expect("theta predicate"));
        let exit_label = format!("exit{}", n.0);
        self.terminate(Term::Branch(Type::Int(1), pred, vec![exit_label.clone(), head_label]));
        let exit = self.new_block(exit_label);
        self.cur = exit;
        for (l, v) in vars.iter().enumerate() {
            if let Some((name, _)) = v {
                self.env.insert(Origin::Out(n, l as u32), var(name.clone()));
            }
        }
    }
}

/// Lower the body of λ or δ `n`. `env` binds the region's context
/// arguments and parameters; the returned CFG returns the first value result.
pub fn scfr(g: &Graph, n: NodeId, env: Env) -> Cfg {
    let body = g.subregions(n)[0];
    let mut lw = Lowering { g, blocks: Vec::new(), cur: 0, env };
    lw.new_block("entry".to_string());
    lw.region(body);
    let ret = (0..g.region(body).results.len()).filter_map(|i| g.result(body, i)).find(|&o| g.origin_ty(o).is_value()).map(|o| lw.op(o));
    lw.terminate(Term::Ret(ret));
    Cfg { blocks: lw.blocks }
}
