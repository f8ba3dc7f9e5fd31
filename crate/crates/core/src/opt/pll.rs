//! Pull-in: sinking nodes into the single γ alternative that uses them.
//!
//! A stateless simple node whose outputs feed only entry variables of one
//! γ, where those entry variables are used in exactly one alternative, is
//! copied into that alternative and removed outside. Processing users
//! before producers lets whole chains follow one another in.

use super::regions_postorder;
use crate::graph::topo::topo;
use crate::graph::views;
use crate::graph::{Graph, NodeId, NodeKind, Origin, RegionId, User};

/// Pull nodes into γ alternatives; returns the number of nodes moved.
pub fn pll(g: &mut Graph) -> usize {
    let mut moved = 0;
    for r in regions_postorder(g) {
        for n in topo(g, r).into_iter().rev() {
            if let Some((gm, alt, entries)) = target(g, n) {
                pull(g, n, gm, alt, &entries);
                moved += 1;
            }
        }
    }
    moved
}

/// The γ, alternative and entry variables node `n` can be pulled into.
fn target(g: &Graph, n: NodeId) -> Option<(NodeId, RegionId, Vec<usize>)> {
    if g.op(n).is_none_or(|op| op.stateful()) {
        return None;
    }
    let mut gamma = None;
    let mut entries = Vec::new();
    for i in 0..g.num_outputs(n) {
        for &u in g.users(Origin::Out(n, i as u32)) {
            match u {
                User::In(m, j) if j > 0 && matches!(g.kind(m), NodeKind::Gamma) => {
                    if gamma.is_some_and(|x| x != m) {
                        return None;
                    }
                    gamma = Some(m);
                    entries.push(j as usize - 1);
                }
                _ => return None,
            }
        }
    }
    let gm = gamma?;
    let mut alt = None;
    for &l in &entries {
        for arg in views::entry_var(g, gm, l).args {
            if g.users(arg).is_empty() {
                continue;
            }
            let r = g.origin_region(arg);
            if alt.is_some_and(|a| a != r) {
                return None;
            }
            alt = Some(r);
        }
    }
    entries.sort_unstable();
    entries.dedup();
    // Entry variables nobody reads are left for DNE.
    Some((gm, alt?, entries))
}

fn pull(g: &mut Graph, n: NodeId, gm: NodeId, alt: RegionId, entries: &[usize]) {
    let ins: Vec<Origin> = g.inputs(n).into_iter().map(|o| g.route_to_region(o, alt).expect("route into alternative")).collect();
    let copy = g.copy_node(n, alt, &ins).expect("pulled copy");
    for &l in entries.iter().rev() {
        let Origin::Out(_, i) = g.input(gm, l + 1) else { unreachable!() };
        g.divert_users(Origin::Arg(alt, l as u32), Origin::Out(copy, i)).expect("same type");
        g.remove_entry_var(gm, l).expect("entry variable unused");
    }
    g.remove_node(n).expect("no users left");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::construct;
    use crate::graph::{validate, BinOp, Op};
    use crate::source::parse;

    fn div_parent_depth(g: &Graph) -> usize {
        let d = g.node_ids().find(|&n| matches!(g.op(n), Some(Op::Bin(BinOp::Div, _)))).unwrap();
        g.region_depth(g.parent(d))
    }

    #[test]
    fn division_moves_into_its_alternative() {
        let src = "export define i64 @f(i64 %a, i64 %b) {
entry:
  %q = div i64 %a, %b
  %c = gt i64 %a, 0
  branch i1 %c, [%no, %yes]
yes:
  %r = add i64 %q, 1
  br label %end
no:
  %r = copy i64 %a
  br label %end
end:
  ret %r
}";
        let mut g = construct(&parse(src).unwrap()).unwrap().graph;
        let before = div_parent_depth(&g);
        assert!(pll(&mut g) >= 1);
        assert!(validate(&g).is_empty(), "{:?}", validate(&g));
        assert_eq!(div_parent_depth(&g), before + 1);
    }

    #[test]
    fn node_used_by_both_alternatives_stays() {
        let src = "export define i64 @f(i64 %a, i64 %b) {
entry:
  %q = div i64 %a, %b
  %c = gt i64 %a, 0
  branch i1 %c, [%no, %yes]
yes:
  %r = add i64 %q, 1
  br label %end
no:
  %r = sub i64 %q, 1
  br label %end
end:
  ret %r
}";
        let mut g = construct(&parse(src).unwrap()).unwrap().graph;
        let before = div_parent_depth(&g);
        pll(&mut g);
        assert_eq!(div_parent_depth(&g), before);
    }
}
