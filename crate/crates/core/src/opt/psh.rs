//! Push-out: hoisting invariant nodes out of γ and θ regions.
//!
//! A stateless simple node with at least one input is invariant when every
//! input is an entry argument (γ), the argument of a pass-through loop
//! variable (θ), or the output of a node already hoisted. Hoisted nodes are
//! copied into the parent region and their value is routed back in through
//! a new entry or loop variable. Nodes that may trap stay inside γ regions,
//! where they might not execute at all; a θ body always executes once, so
//! there they move too. Constants are not hoisted.

use super::structural_postorder;
use crate::graph::topo::topo;
use crate::graph::views;
use crate::graph::{Graph, NodeId, NodeKind, Origin};
use std::collections::HashMap;

/// Hoist invariant nodes; returns the number of nodes moved.
pub fn psh(g: &mut Graph) -> usize {
    let mut moved = 0;
    for n in structural_postorder(g, |k| matches!(k, NodeKind::Gamma | NodeKind::Theta)) {
        moved += match g.kind(n) {
            NodeKind::Theta => hoist_theta(g, n),
            _ => hoist_gamma(g, n),
        };
    }
    moved
}

fn hoistable(g: &Graph, n: NodeId, allow_trap: bool) -> bool {
    match g.op(n) {
        Some(op) => !op.stateful() && (allow_trap || !op.can_trap()) && g.num_inputs(n) > 0,
        None => false,
    }
}

fn hoist_theta(g: &mut Graph, t: NodeId) -> usize {
    let body = g.subregions(t)[0];
    let parent = g.parent(t);
    // Body argument to the parent origin it always equals.
    let mut outside: HashMap<Origin, Origin> = HashMap::new();
    for l in 0..views::num_loop_vars(g, t) {
        let lv = views::loop_var(g, t, l);
        if lv.result == Some(lv.arg) {
            outside.insert(lv.arg, lv.input);
        }
    }
    let mut moved = 0;
    for n in topo(g, body) {
        if !hoistable(g, n, true) {
            continue;
        }
        let Some(ins) = g.inputs(n).iter().map(|o| outside.get(o).copied()).collect::<Option<Vec<_>>>() else { continue };
        let copy = g.copy_node(n, parent, &ins).expect("hoisted copy");
        for i in 0..g.num_outputs(n) as u32 {
            let l = g.add_loop_var(t, Origin::Out(copy, i)).expect("loop variable for hoisted value");
            let arg = Origin::Arg(body, l as u32);
            g.divert_users(Origin::Out(n, i), arg).expect("same type");
            outside.insert(arg, Origin::Out(copy, i));
        }
        g.remove_node(n).expect("users diverted");
        moved += 1;
    }
    moved
}

fn hoist_gamma(g: &mut Graph, gm: NodeId) -> usize {
    let parent = g.parent(gm);
    let mut moved = 0;
    for r in g.subregions(gm).to_vec() {
        let mut outside: HashMap<Origin, Origin> = HashMap::new();
        for l in 0..views::num_entry_vars(g, gm) {
            outside.insert(Origin::Arg(r, l as u32), g.input(gm, l + 1));
        }
        for n in topo(g, r) {
            if !hoistable(g, n, false) {
                continue;
            }
            let Some(ins) = g.inputs(n).iter().map(|o| outside.get(o).copied()).collect::<Option<Vec<_>>>() else { continue };
            let copy = g.copy_node(n, parent, &ins).expect("hoisted copy");
            for i in 0..g.num_outputs(n) as u32 {
                let l = g.add_entry_var(gm, Origin::Out(copy, i)).expect("entry variable for hoisted value");
                let arg = Origin::Arg(r, l as u32);
                g.divert_users(Origin::Out(n, i), arg).expect("same type");
                outside.insert(arg, Origin::Out(copy, i));
            }
            g.remove_node(n).expect("users diverted");
            moved += 1;
        }
    }
    moved
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::construct;
    use crate::graph::{validate, BinOp, Op};
    use crate::opt::{dne::dne, inv::inv};
    use crate::source::parse;

    fn theta_body_ops(g: &Graph) -> Vec<String> {
        let t = g.node_ids().find(|&n| matches!(g.kind(n), NodeKind::Theta)).unwrap();
        g.nodes_in(g.subregions(t)[0]).iter().filter_map(|&n| g.op(n).map(|o| o.name())).collect()
    }

    #[test]
    fn invariant_chain_leaves_the_loop() {
        let src = "export define i64 @f(i64 %a, i64 %b, i64 %n) {
entry:
  %s = copy i64 0
  %i = copy i64 0
  br label %loop
loop:
  %x = add i64 %a, %b
  %y = mul i64 %x, %a
  %s = add i64 %s, %y
  %i = add i64 %i, 1
  %c = lt i64 %i, %n
  branch i1 %c, [%out, %loop]
out:
  ret %s
}";
        let mut g = construct(&parse(src).unwrap()).unwrap().graph;
        assert!(theta_body_ops(&g).contains(&"mul".to_string()));
        let moved = psh(&mut g);
        assert_eq!(moved, 2, "add and mul are hoisted");
        inv(&mut g);
        dne(&mut g);
        assert!(validate(&g).is_empty(), "{:?}", validate(&g));
        assert!(!theta_body_ops(&g).contains(&"mul".to_string()));
        let muls = g.node_ids().filter(|&n| matches!(g.op(n), Some(Op::Bin(BinOp::Mul, _)))).count();
        assert_eq!(muls, 1);
    }

    #[test]
    fn variant_node_stays() {
        let src = "export define i64 @f(i64 %a, i64 %n) {
entry:
  %i = copy i64 0
  br label %loop
loop:
  %i = add i64 %i, %a
  %c = lt i64 %i, %n
  branch i1 %c, [%out, %loop]
out:
  ret %i
}";
        let mut g = construct(&parse(src).unwrap()).unwrap().graph;
        assert_eq!(psh(&mut g), 0);
    }
}
