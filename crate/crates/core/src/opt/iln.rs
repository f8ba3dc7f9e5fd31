//! Function inlining.
//!
//! An apply node is inlined when its callee is statically known, is not
//! part of a recursive φ, and either has this single caller or a body of
//! at most [`MAX_INLINE_NODES`] simple nodes. The callee body is copied into
//! the caller's region with context arguments routed in from the root.

use crate::graph::views;
use crate::graph::{Graph, NodeId, NodeKind, Op, Origin};

pub const MAX_INLINE_NODES: usize = 16;

fn candidates(g: &Graph) -> Vec<(NodeId, NodeId)> {
    let root = g.root();
    g.node_ids()
        .filter(|&n| matches!(g.op(n), Some(Op::Apply(_))))
        .filter_map(|n| {
            let lam = views::callee_lambda(g, g.input(n, 0))?;
            (g.parent(lam) == root).then_some((n, lam))
        })
        .collect()
}

fn simple_size(g: &Graph, lam: NodeId) -> usize {
    g.nodes_deep(g.subregions(lam)[0]).into_iter().filter(|&n| matches!(g.kind(n), NodeKind::Simple(_))).count()
}

/// Inline eligible calls; returns the number of calls inlined.
pub fn iln(g: &mut Graph) -> usize {
    let mut inlined = 0;
    for (apply, lam) in candidates(g) {
        if !g.has_node(apply) || !g.has_node(lam) {
            continue;
        }
        if views::callers(g, lam).len() != 1 && simple_size(g, lam) > MAX_INLINE_NODES {
            continue;
        }
        inline(g, apply, lam);
        inlined += 1;
    }
    inlined
}

fn inline(g: &mut Graph, apply: NodeId, lam: NodeId) {
    let region = g.parent(apply);
    let body = g.subregions(lam)[0];
    let mut map = Vec::new();
    for l in 0..views::num_context_vars(g, lam) {
        let o = g.input(lam, l);
        map.push(g.route_to_region(o, region).expect("route context into caller"));
    }
    map.extend(g.inputs(apply).into_iter().skip(1));
    let res = g.copy_region_into(body, region, &map).expect("copy callee body");
    for (i, o) in res.into_iter().enumerate() {
        g.divert_users(Origin::Out(apply, i as u32), o.expect("complete lambda")).expect("same type");
    }
    g.remove_node(apply).expect("outputs diverted");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::construct;
    use crate::graph::validate;
    use crate::opt::dne::dne;
    use crate::source::parse;

    fn applies(g: &Graph) -> usize {
        g.node_ids().filter(|&n| matches!(g.op(n), Some(Op::Apply(_)))).count()
    }

    #[test]
    fn single_caller_is_inlined() {
        let src = "define i64 @sq(i64 %x) {\n  %y = mul i64 %x, %x\n  ret %y\n}
export define i64 @f(i64 %a) {\n  %b = call i64 @sq(i64 %a)\n  ret %b\n}";
        let mut g = construct(&parse(src).unwrap()).unwrap().graph;
        assert_eq!(applies(&g), 1);
        assert_eq!(iln(&mut g), 1);
        dne(&mut g);
        assert!(validate(&g).is_empty(), "{:?}", validate(&g));
        assert_eq!(applies(&g), 0);
        let lambdas = g.node_ids().filter(|&n| matches!(g.kind(n), NodeKind::Lambda { .. })).count();
        assert_eq!(lambdas, 1, "the callee is dead after inlining");
    }

    #[test]
    fn recursion_is_kept() {
        let path = format!("{}/corpus/recursive.ir", env!("CARGO_MANIFEST_DIR"));
        let m = parse(&std::fs::read_to_string(path).unwrap()).unwrap();
        let mut g = construct(&m).unwrap().graph;
        let before = applies(&g);
        assert_eq!(iln(&mut g), 0);
        assert_eq!(applies(&g), before);
    }
}
