//! θ–γ inversion.
//!
//! A loop whose body is a γ on the loop predicate itself, preceded only by
//! stateless glue computing that predicate and the γ's inputs, becomes a γ
//! with the loop in its continue alternative:
//!
//! ```text
//! θ(x) { g = glue(x); y = γ(p(g)) [exit: A(g), continue: B(g)] } while p(g)
//! ```
//!
//! turns into
//!
//! ```text
//! γ(p(glue(x0))) [exit: A(glue(x0)),
//!                 continue: x' = θ(x) { y = B(glue(x)) } while p(glue(y));
//!                           A(glue(x'))]
//! ```
//!
//! Loops with stateful glue or glue that reads the γ's outputs are skipped.

use super::structural_postorder;
use crate::graph::topo::topo;
use crate::graph::views;
use crate::graph::{Graph, NodeId, NodeKind, Origin, RegionId};
use std::collections::HashMap;

/// Invert eligible loops; returns the number of loops inverted.
pub fn ivt(g: &mut Graph) -> usize {
    let mut count = 0;
    for t in structural_postorder(g, |k| matches!(k, NodeKind::Theta)) {
        if !g.has_node(t) {
            continue;
        }
        if let Some(gm) = candidate(g, t) {
            invert(g, t, gm);
            count += 1;
        }
    }
    count
}

/// The γ of an invertible loop.
fn candidate(g: &Graph, t: NodeId) -> Option<NodeId> {
    let body = g.subregions(t)[0];
    let pred = views::theta_predicate(g, t)?;
    let nodes = g.nodes_in(body);
    let gammas: Vec<NodeId> = nodes.iter().copied().filter(|&n| matches!(g.kind(n), NodeKind::Gamma)).collect();
    let [gm] = gammas[..] else { return None };
    if g.input(gm, 0) != pred || g.subregions(gm).len() != 2 {
        return None;
    }
    for &n in &nodes {
        if n == gm {
            continue;
        }
        let op = g.op(n)?;
        if op.stateful() || g.inputs(n).iter().any(|o| Graph::producer(*o) == Some(gm)) {
            return None;
        }
    }
    Some(gm)
}

struct Loop {
    body: RegionId,
    gamma: NodeId,
    vars: usize,
}

impl Loop {
    /// Copy the glue of the body into `dst` with arguments `x`.
    fn glue(&self, g: &mut Graph, dst: RegionId, x: &[Origin]) -> HashMap<Origin, Origin> {
        let mut map: HashMap<Origin, Origin> = x.iter().enumerate().map(|(l, &o)| (Origin::Arg(self.body, l as u32), o)).collect();
        for n in topo(g, self.body) {
            if n == self.gamma {
                continue;
            }
            let ins: Vec<Origin> = g.inputs(n).iter().map(|o| map[o]).collect();
            let c = g.copy_node(n, dst, &ins).expect("glue copy");
            for i in 0..g.num_outputs(n) as u32 {
                map.insert(Origin::Out(n, i), Origin::Out(c, i));
            }
        }
        map
    }

    fn pred(&self, g: &Graph, map: &HashMap<Origin, Origin>) -> Origin {
        map[&g.input(self.gamma, 0)]
    }

    /// Values of the loop variables after one iteration taking alternative `alt`.
    fn step(&self, g: &mut Graph, dst: RegionId, alt: usize, map: &HashMap<Origin, Origin>) -> Vec<Origin> {
        let ins: Vec<Origin> = g.inputs(self.gamma).iter().skip(1).map(|o| map[o]).collect();
        let src = g.subregions(self.gamma)[alt];
        let outs = g.copy_region_into(src, dst, &ins).expect("alternative copy");
        (0..self.vars)
            .map(|l| match g.result(self.body, l + 1).expect("complete theta") {
                Origin::Out(n, j) if n == self.gamma => outs[j as usize].expect("complete gamma"),
                o => map[&o],
            })
            .collect()
    }

    /// Glue followed by the exit alternative.
    fn finish(&self, g: &mut Graph, dst: RegionId, x: &[Origin]) -> Vec<Origin> {
        let m = self.glue(g, dst, x);
        self.step(g, dst, 0, &m)
    }
}

fn invert(g: &mut Graph, t: NodeId, gamma: NodeId) {
    let lp = Loop { body: g.subregions(t)[0], gamma, vars: views::num_loop_vars(g, t) };
    let parent = g.parent(t);
    let x0 = g.inputs(t);
    let m0 = lp.glue(g, parent, &x0);
    let p0 = lp.pred(g, &m0);
    let outer = g.add_gamma(parent, p0, 2).expect("outer gamma");
    for &o in &x0 {
        g.add_entry_var(outer, o).expect("entry variable");
    }
    let (exit, cont) = (g.subregions(outer)[0], g.subregions(outer)[1]);
    let args = |r: RegionId| (0..lp.vars).map(|l| Origin::Arg(r, l as u32)).collect::<Vec<_>>();

    let r0 = lp.finish(g, exit, &args(exit));

    let inner = g.add_theta(cont);
    for o in args(cont) {
        g.add_loop_var(inner, o).expect("loop variable");
    }
    let ib = g.subregions(inner)[0];
    let m = lp.glue(g, ib, &args(ib));
    let y = lp.step(g, ib, 1, &m);
    let m2 = lp.glue(g, ib, &y);
    let p = lp.pred(g, &m2);
    g.set_result(ib, 0, p).expect("predicate");
    for (l, o) in y.into_iter().enumerate() {
        g.set_result(ib, l + 1, o).expect("loop result");
    }
    let xf: Vec<Origin> = (0..lp.vars).map(|l| Origin::Out(inner, l as u32)).collect();
    let r1 = lp.finish(g, cont, &xf);

    for l in 0..lp.vars {
        g.add_exit_var(outer, &[r0[l], r1[l]]).expect("exit variable");
        g.divert_users(Origin::Out(t, l as u32), Origin::Out(outer, l as u32)).expect("same type");
    }
    g.remove_node(t).expect("loop outputs diverted");
    g.prune_unused(parent);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::construct;
    use crate::graph::validate;
    use crate::interp::{eval_rvsdg, Value};
    use crate::opt::{dne::dne, red::red};
    use crate::source::parse;

    fn gcd() -> Graph {
        let path = format!("{}/corpus/gcd.ir", env!("CARGO_MANIFEST_DIR"));
        construct(&parse(&std::fs::read_to_string(path).unwrap()).unwrap()).unwrap().graph
    }

    #[test]
    fn while_loop_becomes_guarded_do_while() {
        let base = gcd();
        let mut g = base.clone();
        assert_eq!(ivt(&mut g), 0, "the loop predicate is a selector until RED runs");
        red(&mut g);
        dne(&mut g);
        assert_eq!(ivt(&mut g), 1);
        dne(&mut g);
        assert!(validate(&g).is_empty(), "{:?}", validate(&g));
        // The loop now sits inside the continue alternative of a γ.
        let t = g.node_ids().find(|&n| matches!(g.kind(n), NodeKind::Theta)).unwrap();
        let (owner, alt) = g.owner(g.parent(t)).unwrap();
        assert!(matches!(g.kind(owner), NodeKind::Gamma));
        assert_eq!(alt, 1);
        for a in 0..12 {
            for b in 0..12 {
                let args = [Value::i64(a), Value::i64(b)];
                let want = eval_rvsdg(&base, "gcd", &args, 100_000);
                let got = eval_rvsdg(&g, "gcd", &args, 100_000);
                assert_eq!(got.is_ok(), want.is_ok(), "gcd({a}, {b})");
                if let (Ok(x), Ok(y)) = (got, want) {
                    assert_eq!(x, y, "gcd({a}, {b})");
                }
            }
        }
    }

    #[test]
    fn loop_without_gamma_is_unchanged() {
        let src = "export define i64 @f(i64 %n) {
entry:
  %i = copy i64 0
  br label %loop
loop:
  %i = add i64 %i, 1
  %c = lt i64 %i, %n
  branch i1 %c, [%out, %loop]
out:
  ret %i
}";
        let mut g = construct(&parse(src).unwrap()).unwrap().graph;
        assert_eq!(ivt(&mut g), 0);
    }
}
