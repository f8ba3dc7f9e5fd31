//! Inter-procedure graph: one node per function or global, an edge from
//! `a` to `b` whenever the body of `a` names `@b`.

use super::{Cfg, Module, Operand};
use std::collections::BTreeSet;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ipg {
    /// Node names: globals in module order, then functions.
    pub names: Vec<String>,
    /// Sorted, deduplicated `(from, to)` index pairs.
    pub edges: Vec<(usize, usize)>,
}

impl Ipg {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn successors(&self, i: usize) -> Vec<usize> {
        self.edges.iter().filter(|(a, _)| *a == i).map(|(_, b)| *b).collect()
    }

    pub fn to_petgraph(&self) -> petgraph::graph::DiGraph<usize, ()> {
        let mut g = petgraph::graph::DiGraph::new();
        let ids: Vec<_> = (0..self.names.len()).map(|i| g.add_node(i)).collect();
        for &(a, b) in &self.edges {
            g.add_edge(ids[a], ids[b], ());
        }
        g
    }
}

/// Symbols syntactically referenced anywhere in `cfg`, sorted.
pub fn referenced_symbols(cfg: &Cfg) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut visit = |o: &Operand| {
        if let Operand::Sym(s) = o {
            out.insert(s.clone());
        }
    };
    for b in &cfg.blocks {
        for p in &b.phis {
            p.incoming.iter().for_each(|(o, _)| visit(o));
        }
        for i in &b.insts {
            i.kind.operands().into_iter().for_each(&mut visit);
        }
        if let Some(o) = b.term.operand() {
            visit(o);
        }
    }
    out
}

pub fn compute_ipg(m: &Module) -> Ipg {
    let mut names: Vec<String> = m.globals.iter().map(|g| g.name.clone()).collect();
    names.extend(m.functions.iter().map(|f| f.name.clone()));
    let bodies: Vec<Option<&Cfg>> = m.globals.iter().map(|g| g.init.as_ref()).chain(m.functions.iter().map(|f| f.body.as_ref())).collect();
    let mut edges = BTreeSet::new();
    for (i, body) in bodies.iter().enumerate() {
        if let Some(cfg) = body {
            for s in referenced_symbols(cfg) {
                if let Some(j) = names.iter().position(|n| *n == s) {
                    edges.insert((i, j));
                }
            }
        }
    }
    Ipg { names, edges: edges.into_iter().collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::parse;

    #[test]
    fn self_recursion() {
        let m = parse("define i64 @f(i64 %n) {\n  %r = call i64 @f(i64 %n)\n  ret %r\n}").unwrap();
        let ipg = compute_ipg(&m);
        assert_eq!(ipg.names.len(), 1);
        assert_eq!(ipg.edges, vec![(0, 0)]);
    }

    #[test]
    fn independent_functions() {
        let m = parse("define i64 @f(i64 %n) { ret %n }\ndefine i64 @g(i64 %n) { ret %n }").unwrap();
        let ipg = compute_ipg(&m);
        assert_eq!(ipg.names.len(), 2);
        assert!(ipg.edges.is_empty());
    }
}
