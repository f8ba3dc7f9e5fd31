//! Copying nodes and region bodies, and routing values into nested regions.

use super::topo::topo;
use super::views;
use super::{EditResult, Graph, NodeId, NodeKind, Origin, RegionId};
use std::collections::HashMap;

impl Graph {
    /// Copy `n` (including subregions) into `dst` with the given input origins.
    pub fn copy_node(&mut self, n: NodeId, dst: RegionId, inputs: &[Origin]) -> EditResult<NodeId> {
        let node = self.node(n).clone();
        let ins: Vec<_> = node.inputs.iter().map(|s| s.ty.clone()).zip(inputs.iter().copied()).collect();
        if ins.len() != node.inputs.len() {
            return Err(super::EditError::Arity { expected: node.inputs.len(), found: inputs.len() });
        }
        let outs = node.outputs.iter().map(|p| p.ty.clone()).collect();
        let new = self.new_node(dst, node.kind.clone(), &ins, outs)?;
        for &s in &node.regions {
            let s2 = self.add_subregion(new);
            for (i, a) in self.region(s).args.clone().iter().enumerate() {
                self.insert_arg(s2, i, a.ty.clone());
            }
            for (i, res) in self.region(s).results.clone().iter().enumerate() {
                self.insert_result(s2, i, res.ty.clone(), None);
            }
            let map: Vec<Origin> = (0..self.region(s2).args.len()).map(|i| Origin::Arg(s2, i as u32)).collect();
            let res = self.copy_region_into(s, s2, &map)?;
            for (i, o) in res.into_iter().enumerate() {
                if let Some(o) = o {
                    self.set_result(s2, i, o)?;
                }
            }
        }
        Ok(new)
    }

    /// Copy every node of `src` into `dst`, substituting `arg_map[i]` for
    /// argument `i` of `src`. Returns the mapped origins of `src`'s results.
    pub fn copy_region_into(&mut self, src: RegionId, dst: RegionId, arg_map: &[Origin]) -> EditResult<Vec<Option<Origin>>> {
        let mut map: HashMap<Origin, Origin> = HashMap::new();
        for (i, o) in arg_map.iter().enumerate() {
            map.insert(Origin::Arg(src, i as u32), *o);
        }
        for n in topo(self, src) {
            let ins: Vec<Origin> = self.inputs(n).iter().map(|o| map[o]).collect();
            let new = self.copy_node(n, dst, &ins)?;
            for i in 0..self.num_outputs(n) {
                map.insert(Origin::Out(n, i as u32), Origin::Out(new, i as u32));
            }
        }
        Ok(self.region(src).results.iter().map(|s| s.origin.map(|o| map[&o])).collect())
    }

    /// Make `origin` (living in an ancestor region) available inside `target`
    /// by threading it through entry, loop or context variables of every
    /// structural node in between. Existing pass-through variables are reused.
    pub fn route_to_region(&mut self, origin: Origin, target: RegionId) -> EditResult<Origin> {
        let home = self.origin_region(origin);
        let mut path = Vec::new();
        let mut r = target;
        while r != home {
            let (n, sub) = self.owner(r).ok_or_else(|| super::EditError::Invalid(format!("{home} is not an ancestor of {target}")))?;
            path.push((n, sub as usize));
            r = self.parent(n);
        }
        let mut cur = origin;
        for (n, sub) in path.into_iter().rev() {
            let body = self.subregions(n)[sub];
            cur = match self.kind(n).clone() {
                NodeKind::Gamma => {
                    let found = (0..views::num_entry_vars(self, n)).find(|&l| self.input(n, l + 1) == cur);
                    let l = match found {
                        Some(l) => l,
                        None => self.add_entry_var(n, cur)?,
                    };
                    Origin::Arg(body, l as u32)
                }
                NodeKind::Theta => {
                    let found = (0..views::num_loop_vars(self, n)).find(|&l| {
                        let lv = views::loop_var(self, n, l);
                        lv.input == cur && lv.result == Some(lv.arg)
                    });
                    let l = match found {
                        Some(l) => l,
                        None => self.add_loop_var(n, cur)?,
                    };
                    Origin::Arg(body, l as u32)
                }
                NodeKind::Lambda { .. } | NodeKind::Delta { .. } | NodeKind::Phi => {
                    let found = (0..views::num_context_vars(self, n)).find(|&l| self.input(n, l) == cur);
                    let l = match found {
                        Some(l) => l,
                        None => self.add_context_var(n, cur)?,
                    };
                    Origin::Arg(body, l as u32)
                }
                NodeKind::Simple(_) => unreachable!(),
            };
        }
        Ok(cur)
    }
}

#[cfg(test)]
mod tests {
    use crate::graph::{validate, Graph, Lit, MatchTable, Op, Origin};
    use crate::types::I64;

    #[test]
    fn route_through_theta_and_gamma() {
        let mut g = Graph::new();
        let root = g.root();
        let c = g.add_const(root, Lit::int(64, 5));
        let t = g.add_theta(root);
        let body = g.subregions(t)[0];
        let k = g.add_const(body, Lit::int(64, 0));
        let p = g.simple_out(body, Op::Match { ty: I64, table: MatchTable::identity(2) }, &[k]).unwrap();
        g.set_result(body, 0, p).unwrap();
        let gm = g.add_gamma(body, p, 2).unwrap();
        let inner = g.subregions(gm)[1];
        let routed = g.route_to_region(c, inner).unwrap();
        assert!(matches!(routed, Origin::Arg(r, _) if r == inner));
        let again = g.route_to_region(c, inner).unwrap();
        assert_eq!(routed, again);
        assert!(validate(&g).is_empty(), "{:?}", validate(&g));
    }

    #[test]
    fn copy_theta_is_valid() {
        let mut g = Graph::new();
        let root = g.root();
        let c = g.add_const(root, Lit::int(64, 5));
        let t = g.add_theta(root);
        g.add_loop_var(t, c).unwrap();
        let body = g.subregions(t)[0];
        let n = g.simple_out(body, Op::Neg(I64), &[Origin::Arg(body, 0)]).unwrap();
        let m = g.simple_out(body, Op::Match { ty: I64, table: MatchTable::identity(2) }, &[n]).unwrap();
        g.set_result(body, 0, m).unwrap();
        g.set_result(body, 1, n).unwrap();
        let t2 = g.copy_node(t, root, &[c]).unwrap();
        assert_eq!(g.nodes_deep(g.subregions(t2)[0]).len(), 2);
        assert!(validate(&g).is_empty(), "{:?}", validate(&g));
    }
}
