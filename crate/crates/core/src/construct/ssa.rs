//! SSA destruction and CFG normalization ahead of restructuring.

use crate::source::{Block, Cfg, Inst, InstKind, Operand, Term};
use crate::types::Type;
use std::collections::BTreeSet;

/// Names of every variable assigned or read in `cfg`.
pub fn variable_names(cfg: &Cfg) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for b in &cfg.blocks {
        for p in &b.phis {
            out.insert(p.dst.clone());
            out.extend(p.incoming.iter().filter_map(|(o, _)| o.var().map(str::to_string)));
        }
        for i in &b.insts {
            out.extend(i.dst.clone());
            out.extend(i.kind.operands().into_iter().filter_map(|o| o.var().map(str::to_string)));
        }
        if let Some(v) = b.term.operand().and_then(Operand::var) {
            out.insert(v.to_string());
        }
    }
    out
}

/// Generator of variable names that do not collide with existing ones.
pub struct Fresh {
    used: BTreeSet<String>,
    next: usize,
}

impl Fresh {
    pub fn new(used: BTreeSet<String>) -> Fresh {
        Fresh { used, next: 0 }
    }

    pub fn name(&mut self, base: &str) -> String {
        loop {
            let n = format!("{base}.{}", self.next);
            self.next += 1;
            if self.used.insert(n.clone()) {
                return n;
            }
        }
    }
}

fn copy(dst: &str, ty: &Type, src: Operand) -> Inst {
    Inst { dst: Some(dst.to_string()), kind: InstKind::Copy(ty.clone(), src) }
}

/// Sequentialize the parallel copy `dsts := srcs`. Identity copies are
/// dropped; if some source reads a destination of the same group, all
/// values are first moved to temporaries.
fn parallel_copy(group: Vec<(String, Type, Operand)>, fresh: &mut Fresh) -> Vec<Inst> {
    let group: Vec<_> = group.into_iter().filter(|(d, _, s)| s.var() != Some(d.as_str())).collect();
    let dsts: BTreeSet<&str> = group.iter().map(|(d, _, _)| d.as_str()).collect();
    let conflict = group.iter().any(|(_, _, s)| s.var().is_some_and(|v| dsts.contains(v)));
    if !conflict {
        return group.iter().map(|(d, t, s)| copy(d, t, s.clone())).collect();
    }
    let temps: Vec<String> = group.iter().map(|(d, _, _)| fresh.name(&format!("{d}.pc"))).collect();
    let mut out: Vec<Inst> = group.iter().zip(&temps).map(|((_, t, s), tmp)| copy(tmp, t, s.clone())).collect();
    out.extend(group.iter().zip(&temps).map(|((d, t, _), tmp)| copy(d, t, Operand::Var(tmp.clone()))));
    out
}

/// Replace every phi by copies on the incoming edges, splitting edges whose
/// source has more than one successor.
pub fn destruct_ssa(cfg: &Cfg) -> Cfg {
    if !cfg.has_phis() {
        return cfg.clone();
    }
    let mut fresh = Fresh::new(variable_names(cfg));
    let mut out = cfg.clone();
    let labels = cfg.label_map();
    let succ = cfg.successors();
    for b in &cfg.blocks {
        if b.phis.is_empty() {
            continue;
        }
        let preds: BTreeSet<usize> = b.phis[0].incoming.iter().map(|(_, l)| labels[l]).collect();
        for p in preds {
            let plabel = &cfg.blocks[p].label;
            let group: Vec<_> = b
                .phis
                .iter()
                .map(|phi| {
                    let src = phi.incoming.iter().find(|(_, l)| l == plabel).map(|(o, _)| o.clone()).unwrap_or(Operand::Undef);
                    (phi.dst.clone(), phi.ty.clone(), src)
                })
                .collect();
            let copies = parallel_copy(group, &mut fresh);
            if succ[p].len() == 1 {
                out.blocks[p].insts.extend(copies);
            } else {
                let label = out.fresh_label(&format!("{plabel}.{}", b.label));
                for t in out.blocks[p].term.targets_mut() {
                    if *t == b.label {
                        *t = label.clone();
                    }
                }
                out.blocks.push(Block { label, phis: vec![], insts: copies, term: Term::Br(b.label.clone()) });
            }
        }
    }
    for b in &mut out.blocks {
        b.phis.clear();
    }
    out
}

/// Prepare a phi-free body for restructuring: drop unreachable blocks, turn
/// branches whose targets all coincide into jumps, and funnel all returns
/// into a single exit block.
pub fn normalize(ret: Option<&Type>, cfg: &Cfg) -> Cfg {
    let reach = cfg.reachable();
    let mut out = Cfg { blocks: cfg.blocks.iter().zip(&reach).filter(|(_, r)| **r).map(|(b, _)| b.clone()).collect() };
    for b in &mut out.blocks {
        if let Term::Branch(_, _, ts) = &b.term {
            if ts.iter().all(|t| *t == ts[0]) {
                b.term = Term::Br(ts[0].clone());
            }
        }
    }
    let rets: Vec<usize> = (0..out.blocks.len()).filter(|&i| matches!(out.blocks[i].term, Term::Ret(_))).collect();
    if rets.len() == 1 {
        return out;
    }
    let exit = out.fresh_label("exit");
    let mut fresh = Fresh::new(variable_names(&out));
    let rv = ret.map(|_| fresh.name("retval"));
    for i in rets {
        let Term::Ret(op) = std::mem::replace(&mut out.blocks[i].term, Term::Br(exit.clone())) else { unreachable!() };
        if let (Some(v), Some(t)) = (&rv, ret) {
            out.blocks[i].insts.push(copy(v, t, op.unwrap_or(Operand::Undef)));
        }
    }
    let term = Term::Ret(rv.map(Operand::Var));
    out.blocks.push(Block { label: exit, phis: vec![], insts: vec![], term });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{eval_cfg, Value, DEFAULT_FUEL};
    use crate::source::{parse, print_module, validate_cfg, Mode, Module};

    const SWAP: &str = "define i64 @f(i64 %n) {
entry:
  br label %loop
loop:
  %a = phi i64 [1, %entry], [%b, %loop]
  %b = phi i64 [2, %entry], [%a, %loop]
  %i = phi i64 [0, %entry], [%i2, %loop]
  %i2 = add i64 %i, 1
  %c = lt i64 %i2, %n
  branch i1 %c, [%done, %loop]
done:
  %r = mul i64 %a, 10
  %s = add i64 %r, %b
  ret %s
}";

    fn with_body(m: &Module, cfg: Cfg) -> Module {
        let mut m = m.clone();
        m.functions[0].body = Some(cfg);
        m
    }

    #[test]
    fn swap_needs_temporaries() {
        let m = parse(SWAP).unwrap();
        let d = destruct_ssa(m.functions[0].body.as_ref().unwrap());
        assert!(!d.has_phis());
        let m2 = with_body(&m, d);
        assert!(validate_cfg(&m2.functions[0], Mode::NonSsa).is_empty(), "{}", print_module(&m2));
        for n in 0..6 {
            let a = eval_cfg(&m, "f", &[Value::i64(n)], DEFAULT_FUEL).unwrap();
            let b = eval_cfg(&m2, "f", &[Value::i64(n)], DEFAULT_FUEL).unwrap();
            assert_eq!(a, b, "n = {n}");
        }
    }

    #[test]
    fn phi_free_is_unchanged() {
        let m = parse("define i64 @f(i64 %x) {\n  ret %x\n}").unwrap();
        let cfg = m.functions[0].body.as_ref().unwrap();
        assert_eq!(&destruct_ssa(cfg), cfg);
    }

    #[test]
    fn join_gets_one_copy_per_predecessor() {
        let src = "define i64 @f(i1 %c) {
entry:
  branch i1 %c, [%a, %b]
a:
  br label %j
b:
  br label %j
j:
  %x = phi i64 [1, %a], [2, %b]
  ret %x
}";
        let m = parse(src).unwrap();
        let d = destruct_ssa(m.functions[0].body.as_ref().unwrap());
        assert_eq!(d.blocks.len(), 4);
        assert_eq!(d.blocks[1].insts.len(), 1);
        assert_eq!(d.blocks[2].insts.len(), 1);
    }

    #[test]
    fn critical_edge_is_split() {
        let src = "define i64 @f(i1 %c) {
entry:
  branch i1 %c, [%a, %j]
a:
  br label %j
j:
  %x = phi i64 [1, %entry], [2, %a]
  ret %x
}";
        let m = parse(src).unwrap();
        let d = destruct_ssa(m.functions[0].body.as_ref().unwrap());
        assert_eq!(d.blocks.len(), 4);
        let m2 = with_body(&m, d);
        for c in 0..2 {
            let a = eval_cfg(&m, "f", &[Value::int(1, c)], DEFAULT_FUEL).unwrap();
            assert_eq!(a, eval_cfg(&m2, "f", &[Value::int(1, c)], DEFAULT_FUEL).unwrap());
        }
    }

    #[test]
    fn returns_are_unified() {
        let src = "define i64 @f(i1 %c) {
entry:
  branch i1 %c, [%a, %b]
a:
  ret 1
b:
  ret 2
dead:
  br label %a
}";
        let m = parse(src).unwrap();
        let n = normalize(m.functions[0].ret.as_ref(), m.functions[0].body.as_ref().unwrap());
        assert_eq!(n.blocks.len(), 4);
        assert_eq!(n.blocks.iter().filter(|b| matches!(b.term, Term::Ret(_))).count(), 1);
        let m2 = with_body(&m, n);
        assert!(validate_cfg(&m2.functions[0], Mode::NonSsa).is_empty());
        for c in 0..2 {
            let a = eval_cfg(&m, "f", &[Value::int(1, c)], DEFAULT_FUEL).unwrap();
            assert_eq!(a, eval_cfg(&m2, "f", &[Value::int(1, c)], DEFAULT_FUEL).unwrap());
        }
    }
}
