//! Deterministic topological ordering of a region's nodes.

use super::{Graph, NodeId, Origin, RegionId};
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

/// Nodes of `r` such that every node follows the producers of its inputs.
/// Ties are broken by ascending node id. Errors with the remaining nodes if
/// the region contains a cycle.
pub fn topological_order(g: &Graph, r: RegionId) -> Result<Vec<NodeId>, Vec<NodeId>> {
    let nodes = &g.region(r).nodes;
    let mut indeg: HashMap<NodeId, usize> = nodes.iter().map(|&n| (n, 0)).collect();
    for &n in nodes {
        for s in &g.node(n).inputs {
            if let Some(Origin::Out(p, _)) = s.origin {
                if indeg.contains_key(&p) {
                    *indeg.get_mut(&n).unwrap() += 1;
                }
            }
        }
    }
    let mut heap: BinaryHeap<Reverse<NodeId>> = indeg.iter().filter(|(_, d)| **d == 0).map(|(n, _)| Reverse(*n)).collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(Reverse(n)) = heap.pop() {
        order.push(n);
        for port in &g.node(n).outputs {
            for u in &port.users {
                if let super::User::In(m, _) = u {
                    if let Some(d) = indeg.get_mut(m) {
                        *d -= 1;
                        if *d == 0 {
                            heap.push(Reverse(*m));
                        }
                    }
                }
            }
        }
    }
    if order.len() != nodes.len() {
        let mut rest: Vec<NodeId> = nodes.iter().copied().filter(|n| !order.contains(n)).collect();
        rest.sort();
        return Err(rest);
    }
    Ok(order)
}

/// Like [`topological_order`] but panics on a cycle; for use on validated graphs.
pub fn topo(g: &Graph, r: RegionId) -> Vec<NodeId> {
    topological_order(g, r).unwrap_or_else(|c| panic!("cycle in {r} among {c:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Lit, Op};
    use crate::types::I64;

    #[test]
    fn empty_region() {
        let g = Graph::new();
        assert!(topological_order(&g, g.root()).unwrap().is_empty());
    }

    #[test]
    fn chain() {
        let mut g = Graph::new();
        let r = g.root();
        let a = g.add_const(r, Lit::int(64, 1));
        let b = g.simple_out(r, Op::Neg(I64), &[a]).unwrap();
        let c = g.simple_out(r, Op::Neg(I64), &[b]).unwrap();
        let ids: Vec<NodeId> = [a, b, c].iter().map(|o| Graph::producer(*o).unwrap()).collect();
        assert_eq!(topological_order(&g, r).unwrap(), ids);
    }

    #[test]
    fn diamond_respects_every_edge() {
        let mut g = Graph::new();
        let r = g.root();
        // Create users before the constant so that id order alone would be wrong.
        let c = g.add_const(r, Lit::int(64, 7));
        let x = g.simple_out(r, Op::Neg(I64), &[c]).unwrap();
        let y = g.simple_out(r, Op::Neg(I64), &[c]).unwrap();
        let order = topological_order(&g, r).unwrap();
        let pos = |o: crate::graph::Origin| order.iter().position(|n| *n == Graph::producer(o).unwrap()).unwrap();
        // brute-force: every edge goes forward
        for &n in &order {
            for s in &g.node(n).inputs {
                if let Some(Origin::Out(p, _)) = s.origin {
                    assert!(order.iter().position(|m| *m == p).unwrap() < order.iter().position(|m| *m == n).unwrap());
                }
            }
        }
        assert_eq!(pos(c), 0);
        assert!(pos(x) < pos(y));
    }
}
