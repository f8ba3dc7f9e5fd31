//! Dominator trees and dominance frontiers over successor lists.

use petgraph::algo::dominators::simple_fast;
use petgraph::graph::{DiGraph, NodeIndex};

#[derive(Clone, Debug)]
pub struct DomTree {
    /// Immediate dominator of each block; `None` for the root and unreachable blocks.
    pub idom: Vec<Option<usize>>,
    pub reachable: Vec<bool>,
}

impl DomTree {
    /// Dominators of the graph given by `succ`, rooted at `root`.
    pub fn new(succ: &[Vec<usize>], root: usize) -> DomTree {
        let mut g: DiGraph<(), ()> = DiGraph::new();
        let ids: Vec<NodeIndex> = (0..succ.len()).map(|_| g.add_node(())).collect();
        for (a, ss) in succ.iter().enumerate() {
            for &b in ss {
                g.add_edge(ids[a], ids[b], ());
            }
        }
        let doms = simple_fast(&g, ids[root]);
        let mut reachable = vec![false; succ.len()];
        let mut idom = vec![None; succ.len()];
        for i in 0..succ.len() {
            if i == root {
                reachable[i] = true;
                continue;
            }
            if let Some(d) = doms.immediate_dominator(ids[i]) {
                reachable[i] = true;
                idom[i] = Some(d.index());
            }
        }
        DomTree { idom, reachable }
    }

    /// Whether `a` dominates `b` (reflexive).
    pub fn dominates(&self, a: usize, b: usize) -> bool {
        if !self.reachable[b] {
            return false;
        }
        let mut cur = b;
        loop {
            if cur == a {
                return true;
            }
            match self.idom[cur] {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.idom.len()];
        for (b, d) in self.idom.iter().enumerate() {
            if let Some(d) = d {
                ch[*d].push(b);
            }
        }
        ch
    }

    /// Dominance frontiers (Cytron et al.), using predecessor lists.
    pub fn frontiers(&self, preds: &[Vec<usize>]) -> Vec<Vec<usize>> {
        let n = self.idom.len();
        let mut df = vec![std::collections::BTreeSet::new(); n];
        for b in 0..n {
            if !self.reachable[b] {
                continue;
            }
            let ps: Vec<usize> = preds[b].iter().copied().filter(|p| self.reachable[*p]).collect();
            if ps.len() < 2 {
                continue;
            }
            for p in ps {
                let mut runner = p;
                while Some(runner) != self.idom[b] {
                    df[runner].insert(b);
                    match self.idom[runner] {
                        Some(r) => runner = r,
                        None => break,
                    }
                }
            }
        }
        df.into_iter().map(|s| s.into_iter().collect()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diamond() {
        // 0 -> 1, 2 -> 3
        let succ = vec![vec![1, 2], vec![3], vec![3], vec![]];
        let d = DomTree::new(&succ, 0);
        assert_eq!(d.idom, vec![None, Some(0), Some(0), Some(0)]);
        let preds = vec![vec![], vec![0], vec![0], vec![1, 2]];
        let df = d.frontiers(&preds);
        assert_eq!(df[1], vec![3]);
        assert_eq!(df[2], vec![3]);
        assert!(df[0].is_empty());
    }
}
