//! Node reductions: constant folding, algebraic identities and removal of
//! branches and loops decided by constants.
//!
//! Folding uses the interpreter's operator semantics, so a folded constant
//! is exactly what evaluation would have produced; operations that would
//! trap are left in place. Rewrites repeat for at most [`MAX_ROUNDS`] rounds.

use super::regions_postorder;
use crate::graph::topo::topo;
use crate::graph::views;
use crate::graph::{BinOp, Graph, Lit, NodeId, NodeKind, Op, Origin, RegionId};
use crate::interp::{eval_bin, eval_cmp, eval_neg, Value};
use crate::types::Type;

pub const MAX_ROUNDS: usize = 4;

/// Apply reductions; returns the number of rewrites.
pub fn red(g: &mut Graph) -> usize {
    let mut total = 0;
    for _ in 0..MAX_ROUNDS {
        let mut n = 0;
        for r in regions_postorder(g) {
            if g.has_region(r) {
                n += reduce_region(g, r);
            }
        }
        total += n;
        if n == 0 {
            break;
        }
    }
    total
}

fn lit_of(g: &Graph, o: Origin) -> Option<Lit> {
    match o {
        Origin::Out(n, 0) => match g.op(n) {
            Some(Op::Const(l)) => Some(*l),
            _ => None,
        },
        _ => None,
    }
}

fn to_lit(v: &Value) -> Option<Lit> {
    match *v {
        Value::Int { width, bits } => Some(Lit::Int { width, bits }),
        Value::F64(x) => Some(Lit::f64(x)),
        _ => None,
    }
}

fn is_int(g: &Graph, o: Origin, v: i64) -> bool {
    lit_of(g, o).is_some_and(|l| matches!(l, Lit::Int { .. }) && l.as_i64() == Some(v))
}

/// Replace all uses of `n`'s only output by `o` and drop `n`.
fn replace(g: &mut Graph, n: NodeId, o: Origin) {
    g.divert_users(Origin::Out(n, 0), o).expect("replacement has the same type");
    g.remove_node(n).expect("node has no users");
}

fn replace_lit(g: &mut Graph, n: NodeId, lit: Lit) {
    let c = g.add_const(g.parent(n), lit);
    replace(g, n, c);
}

fn reduce_region(g: &mut Graph, r: RegionId) -> usize {
    let mut count = 0;
    for n in topo(g, r) {
        if !g.has_node(n) {
            continue;
        }
        let done = match g.kind(n).clone() {
            NodeKind::Simple(op) => reduce_simple(g, n, &op),
            NodeKind::Gamma => reduce_gamma(g, n),
            NodeKind::Theta => reduce_theta(g, n),
            _ => false,
        };
        count += done as usize;
    }
    count
}

fn reduce_simple(g: &mut Graph, n: NodeId, op: &Op) -> bool {
    if op.is_const() || op.stateful() || g.users(Origin::Out(n, 0)).is_empty() {
        return false;
    }
    let ins = g.inputs(n);
    let lits: Option<Vec<Lit>> = ins.iter().map(|&o| lit_of(g, o)).collect();
    if let Some(lits) = lits {
        let vals: Vec<Value> = lits.iter().map(Value::lit).collect();
        let folded = match op {
            Op::Bin(b, t) => eval_bin(*b, t, &vals[0], &vals[1]).ok(),
            Op::Neg(t) => eval_neg(t, &vals[0]).ok(),
            Op::Cmp(c, t) => eval_cmp(*c, t, &vals[0], &vals[1]).ok(),
            _ => None,
        };
        if let Some(lit) = folded.as_ref().and_then(to_lit) {
            replace_lit(g, n, lit);
            return true;
        }
    }
    match op {
        Op::Bin(b, Type::Int(w)) => {
            let (x, y) = (ins[0], ins[1]);
            let zero = Lit::int(*w, 0);
            match b {
                BinOp::Add | BinOp::Or | BinOp::Xor if is_int(g, y, 0) => replace(g, n, x),
                BinOp::Add | BinOp::Or | BinOp::Xor if is_int(g, x, 0) => replace(g, n, y),
                BinOp::Sub | BinOp::Shl | BinOp::Shr if is_int(g, y, 0) => replace(g, n, x),
                BinOp::Mul if is_int(g, y, 1) => replace(g, n, x),
                BinOp::Mul if is_int(g, x, 1) => replace(g, n, y),
                BinOp::Mul | BinOp::And if is_int(g, x, 0) || is_int(g, y, 0) => replace_lit(g, n, zero),
                BinOp::Sub | BinOp::Xor if x == y => replace_lit(g, n, zero),
                BinOp::And | BinOp::Or if x == y => replace(g, n, x),
                _ => return false,
            }
            true
        }
        Op::Match { table, .. } => reduce_match(g, n, table.k, |bits| table.lookup(bits)),
        _ => false,
    }
}

/// A match on a γ output whose alternatives each return a constant that
/// maps back to their own index is the γ predicate itself.
fn reduce_match(g: &mut Graph, n: NodeId, k: u32, lookup: impl Fn(u64) -> u32) -> bool {
    let Origin::Out(gm, l) = g.input(n, 0) else { return false };
    if !matches!(g.kind(gm), NodeKind::Gamma) || g.subregions(gm).len() != k as usize {
        return false;
    }
    let ex = views::exit_var(g, gm, l as usize);
    let ok = ex.results.iter().enumerate().all(|(i, o)| match o.and_then(|o| lit_of(g, o)) {
        Some(Lit::Int { bits, .. }) => lookup(bits) == i as u32,
        _ => false,
    });
    if ok {
        let pred = g.input(gm, 0);
        replace(g, n, pred);
    }
    ok
}

/// Alternative selected by a predicate computed from a constant.
fn constant_choice(g: &Graph, pred: Origin) -> Option<usize> {
    let Origin::Out(m, 0) = pred else { return None };
    let Some(Op::Match { table, .. }) = g.op(m) else { return None };
    match lit_of(g, g.input(m, 0))? {
        Lit::Int { bits, .. } => Some(table.lookup(bits) as usize),
        Lit::F64(_) => None,
    }
}

fn reduce_gamma(g: &mut Graph, gm: NodeId) -> bool {
    let Some(alt) = constant_choice(g, g.input(gm, 0)) else { return false };
    let parent = g.parent(gm);
    let region = g.subregions(gm)[alt];
    let map: Vec<Origin> = (0..views::num_entry_vars(g, gm)).map(|l| g.input(gm, l + 1)).collect();
    let res = g.copy_region_into(region, parent, &map).expect("inline alternative");
    for (l, o) in res.into_iter().enumerate() {
        g.divert_users(Origin::Out(gm, l as u32), o.expect("complete gamma")).expect("same type");
    }
    g.remove_node(gm).expect("outputs diverted");
    true
}

/// A θ whose predicate is a constant "exit" runs its body exactly once.
fn reduce_theta(g: &mut Graph, t: NodeId) -> bool {
    let body = g.subregions(t)[0];
    let Some(pred) = views::theta_predicate(g, t) else { return false };
    if constant_choice(g, pred) != Some(0) {
        return false;
    }
    let parent = g.parent(t);
    let map = g.inputs(t);
    let res = g.copy_region_into(body, parent, &map).expect("inline loop body");
    for (l, o) in res.into_iter().skip(1).enumerate() {
        g.divert_users(Origin::Out(t, l as u32), o.expect("complete theta")).expect("same type");
    }
    g.remove_node(t).expect("outputs diverted");
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::construct;
    use crate::graph::{validate, MatchTable};
    use crate::interp::eval_rvsdg;
    use crate::opt::dne::dne;
    use crate::source::parse;
    use crate::types::I64;

    #[test]
    fn folds_constants() {
        let mut g = Graph::new();
        let root = g.root();
        let a = g.add_const(root, Lit::int(64, 2));
        let b = g.add_const(root, Lit::int(64, 3));
        let s = g.simple_out(root, Op::Bin(BinOp::Add, I64), &[a, b]).unwrap();
        let n = g.simple_out(root, Op::Neg(I64), &[s]).unwrap();
        g.add_export("x", n).unwrap();
        assert!(red(&mut g) >= 2);
        dne(&mut g);
        assert_eq!(g.node_count(), 1);
        assert_eq!(lit_of(&g, g.export_origin("x").unwrap()), Some(Lit::int(64, -5)));
    }

    #[test]
    fn division_by_zero_is_not_folded() {
        let mut g = Graph::new();
        let root = g.root();
        let a = g.add_const(root, Lit::int(64, 2));
        let b = g.add_const(root, Lit::int(64, 0));
        let d = g.simple_out(root, Op::Bin(BinOp::Div, I64), &[a, b]).unwrap();
        g.add_export("x", d).unwrap();
        assert_eq!(red(&mut g), 0);
    }

    #[test]
    fn multiply_by_one() {
        let src = "export define i64 @f(i64 %a) {\n  %x = mul i64 %a, 1\n  %y = add i64 0, %x\n  ret %y\n}";
        let mut g = construct(&parse(src).unwrap()).unwrap().graph;
        red(&mut g);
        dne(&mut g);
        assert!(validate(&g).is_empty());
        let lam = g.node_ids().find(|&n| matches!(g.kind(n), NodeKind::Lambda { .. })).unwrap();
        let body = g.subregions(lam)[0];
        assert_eq!(g.nodes_in(body).len(), 0, "the result is the parameter itself");
    }

    #[test]
    fn constant_branch_is_inlined() {
        let src = "export define i64 @f(i64 %a) {
entry:
  %c = lt i64 1, 2
  branch i1 %c, [%no, %yes]
yes:
  %r = mul i64 %a, 3
  br label %end
no:
  %r = sub i64 %a, 3
  br label %end
end:
  ret %r
}";
        let mut g = construct(&parse(src).unwrap()).unwrap().graph;
        red(&mut g);
        dne(&mut g);
        assert!(validate(&g).is_empty());
        assert!(g.node_ids().all(|n| !matches!(g.kind(n), NodeKind::Gamma)));
        let run = eval_rvsdg(&g, "f", &[Value::i64(5)], 1000).unwrap();
        assert_eq!(run.result, Some(Value::i64(15)));
    }

    #[test]
    fn match_of_selector_becomes_predicate() {
        let mut g = Graph::new();
        let root = g.root();
        let x = g.add_const(root, Lit::int(64, 9));
        let p = g.simple_out(root, Op::Match { ty: I64, table: MatchTable::identity(2) }, &[x]).unwrap();
        let gm = g.add_gamma(root, p, 2).unwrap();
        let rs = g.subregions(gm).to_vec();
        let c0 = g.add_const(rs[0], Lit::int(1, 0));
        let c1 = g.add_const(rs[1], Lit::int(1, 1));
        g.add_exit_var(gm, &[c0, c1]).unwrap();
        let m = g.add_simple(root, Op::Match { ty: Type::Int(1), table: MatchTable::identity(2) }, &[Origin::Out(gm, 0)]).unwrap();
        g.add_gamma(root, Origin::Out(m, 0), 2).unwrap();
        let op = g.op(m).unwrap().clone();
        assert!(reduce_simple(&mut g, m, &op));
        assert!(!g.has_node(m));
    }
}
