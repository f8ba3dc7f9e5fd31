//! Structural analysis of restructured CFGs into control trees.
//!
//! Loops are found from back edges (arcs whose target dominates their
//! source); branch joins are immediate post-dominators on the acyclic
//! skeleton. Linear nodes are kept flat: a branch region contributes its
//! entry block, the branch node and the following nodes as consecutive
//! children of the enclosing linear node.

use crate::source::dom::DomTree;
use crate::source::{Cfg, Term};
use std::collections::BTreeSet;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeKind {
    Block(usize),
    Linear,
    Branch,
    Loop,
}

/// Control tree node with the sets filled in by demand annotation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tree {
    pub kind: TreeKind,
    pub children: Vec<Tree>,
    pub reads: BTreeSet<String>,
    pub writes: BTreeSet<String>,
    pub demand: BTreeSet<String>,
    /// Demand set in effect right after the node.
    pub demand_out: BTreeSet<String>,
}

impl Tree {
    fn new(kind: TreeKind, children: Vec<Tree>) -> Tree {
        Tree { kind, children, reads: BTreeSet::new(), writes: BTreeSet::new(), demand: BTreeSet::new(), demand_out: BTreeSet::new() }
    }

    pub fn leaf(b: usize) -> Tree {
        Tree::new(TreeKind::Block(b), vec![])
    }

    /// Blocks in tree order.
    pub fn blocks(&self) -> Vec<usize> {
        match self.kind {
            TreeKind::Block(b) => vec![b],
            _ => self.children.iter().flat_map(Tree::blocks).collect(),
        }
    }

    /// First block executed when entering the node.
    pub fn first_block(&self) -> usize {
        match self.kind {
            TreeKind::Block(b) => b,
            _ => self.children[0].first_block(),
        }
    }

    /// Compact shape, e.g. `lin(b0,loop(lin(b1,br(b2,b3),b4)),b5)`.
    pub fn shape(&self) -> String {
        let inner = || self.children.iter().map(Tree::shape).collect::<Vec<_>>().join(",");
        match self.kind {
            TreeKind::Block(b) => format!("b{b}"),
            TreeKind::Linear => format!("lin({})", inner()),
            TreeKind::Branch => format!("br({})", inner()),
            TreeKind::Loop => format!("loop({})", inner()),
        }
    }

    fn fmt_indent(&self, f: &mut fmt::Formatter<'_>, depth: usize, cfg: Option<&Cfg>) -> fmt::Result {
        let pad = "  ".repeat(depth);
        let set = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(" ");
        let name = match self.kind {
            TreeKind::Block(b) => cfg.map(|c| c.blocks[b].label.clone()).unwrap_or_else(|| format!("b{b}")),
            TreeKind::Linear => "linear".into(),
            TreeKind::Branch => "branch".into(),
            TreeKind::Loop => "loop".into(),
        };
        writeln!(f, "{pad}{name}  R={{{}}} W={{{}}} D={{{}}}", set(&self.reads), set(&self.writes), set(&self.demand))?;
        for c in &self.children {
            c.fmt_indent(f, depth + 1, cfg)?;
        }
        Ok(())
    }

    pub fn render(&self, cfg: &Cfg) -> String {
        struct W<'a>(&'a Tree, &'a Cfg);
        impl fmt::Display for W<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt_indent(f, 0, Some(self.1))
            }
        }
        W(self, cfg).to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unstructured control flow: {0}")]
pub struct Unstructured(pub String);

struct Analysis<'a> {
    cfg: &'a Cfg,
    fwd: Vec<Vec<usize>>,
    /// Loop tail per header.
    tails: Vec<Option<usize>>,
    ipdom: Vec<Option<usize>>,
}

impl Analysis<'_> {
    fn err<T>(&self, msg: String) -> Result<T, Unstructured> {
        Err(Unstructured(msg))
    }

    fn label(&self, b: usize) -> &str {
        &self.cfg.blocks[b].label
    }

    fn region(&self, entry: usize, end: usize, skip_loop: bool, budget: &mut usize) -> Result<Tree, Unstructured> {
        let mut items = Vec::new();
        let mut cur = entry;
        let mut first = true;
        loop {
            if *budget == 0 {
                return self.err(format!("walk from {} does not reach {}", self.label(entry), self.label(end)));
            }
            *budget -= 1;
            if let (Some(tail), false) = (self.tails[cur], first && skip_loop) {
                items.push(Tree::new(TreeKind::Loop, vec![self.region(cur, tail, true, budget)?]));
                if tail == end {
                    break;
                }
                match self.fwd[tail].as_slice() {
                    [next] => cur = *next,
                    _ => return self.err(format!("loop tail {} must have one exit", self.label(tail))),
                }
                first = false;
                continue;
            }
            first = false;
            items.push(Tree::leaf(cur));
            if cur == end {
                break;
            }
            match self.fwd[cur].as_slice() {
                [] => return self.err(format!("{} ends the walk before {}", self.label(cur), self.label(end))),
                [next] => cur = *next,
                targets => {
                    let join = self.ipdom[cur].ok_or_else(|| Unstructured(format!("{} has no join", self.label(cur))))?;
                    let mut alts = Vec::new();
                    for (i, &t) in targets.iter().enumerate() {
                        if t == join || targets[..i].contains(&t) {
                            return self.err(format!("branch in {} has an empty or shared alternative", self.label(cur)));
                        }
                        let last = self.alternative_end(t, join)?;
                        alts.push(self.region(t, last, false, budget)?);
                    }
                    items.push(Tree::new(TreeKind::Branch, alts));
                    cur = join;
                }
            }
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { Tree::new(TreeKind::Linear, items) })
    }

    /// The single block of the alternative starting at `t` that jumps to `join`.
    fn alternative_end(&self, t: usize, join: usize) -> Result<usize, Unstructured> {
        let mut seen = BTreeSet::from([t]);
        let mut stack = vec![t];
        let mut ends = BTreeSet::new();
        while let Some(u) = stack.pop() {
            for &v in &self.fwd[u] {
                if v == join {
                    ends.insert(u);
                } else if seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        match ends.iter().collect::<Vec<_>>().as_slice() {
            [e] if self.fwd[**e].len() == 1 => Ok(**e),
            _ => self.err(format!("alternative {} does not have a single exit to {}", self.label(t), self.label(join))),
        }
    }
}

/// Build the control tree of a restructured CFG.
pub fn structural_analysis(cfg: &Cfg) -> Result<Tree, Unstructured> {
    let n = cfg.blocks.len();
    let succ = cfg.successors();
    let dom = DomTree::new(&succ, 0);
    let mut tails = vec![None; n];
    let mut fwd = vec![Vec::new(); n];
    for (u, ss) in succ.iter().enumerate() {
        for &v in ss {
            if dom.dominates(v, u) {
                if tails[v].is_some_and(|t| t != u) {
                    return Err(Unstructured(format!("loop {} has several back edges", cfg.blocks[v].label)));
                }
                if !matches!(&cfg.blocks[u].term, Term::Branch(_, _, ts) if ts.len() == 2) {
                    return Err(Unstructured(format!("loop {} is not tail-controlled", cfg.blocks[v].label)));
                }
                tails[v] = Some(u);
            } else {
                fwd[u].push(v);
            }
        }
    }
    let exits: Vec<usize> = (0..n).filter(|&b| matches!(cfg.blocks[b].term, Term::Ret(_))).collect();
    let [exit] = exits[..] else {
        return Err(Unstructured(format!("expected one exit block, found {}", exits.len())));
    };
    let mut rev = vec![Vec::new(); n];
    for (u, ss) in fwd.iter().enumerate() {
        for &v in ss {
            rev[v].push(u);
        }
    }
    let pdom = DomTree::new(&rev, exit);
    if let Some(b) = (0..n).find(|&b| !pdom.reachable[b]) {
        return Err(Unstructured(format!("{} cannot reach the exit", cfg.blocks[b].label)));
    }
    let a = Analysis { cfg, fwd, tails, ipdom: pdom.idom };
    let mut budget = 4 * n + 4;
    let tree = a.region(0, exit, false, &mut budget)?;
    let mut count = vec![0usize; n];
    for b in tree.blocks() {
        count[b] += 1;
    }
    if let Some(b) = (0..n).find(|&b| count[b] != 1) {
        return Err(Unstructured(format!("block {} covered {} times", cfg.blocks[b].label, count[b])));
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::cfr::restructure;
    use crate::construct::ssa::normalize;
    use crate::source::parse;

    fn tree_of(src: &str) -> (Cfg, Tree) {
        let m = parse(src).unwrap();
        let f = &m.functions[0];
        let (cfg, _) = restructure(&normalize(f.ret.as_ref(), f.body.as_ref().unwrap()));
        let t = structural_analysis(&cfg).unwrap();
        (cfg, t)
    }

    #[test]
    fn straight_line() {
        let (_, t) = tree_of("define i64 @f(i64 %x) {\na:\n  br label %b\nb:\n  br label %c\nc:\n  ret %x\n}");
        assert_eq!(t.shape(), "lin(b0,b1,b2)");
        let (_, t) = tree_of("define i64 @f(i64 %x) {\n  ret %x\n}");
        assert_eq!(t.shape(), "b0");
    }

    #[test]
    fn diamond() {
        let (_, t) = tree_of("define i64 @f(i1 %c) {\ne:\n  branch i1 %c, [%a, %b]\na:\n  br label %j\nb:\n  br label %j\nj:\n  ret 0\n}");
        assert_eq!(t.shape(), "lin(b0,br(b1,b2),b3)");
    }

    #[test]
    fn gcd_tree() {
        let (cfg, t) = tree_of(crate::construct::cfr::tests::GCD);
        let labels: Vec<&str> = t.blocks().iter().map(|&b| cfg.blocks[b].label.as_str()).collect();
        assert_eq!(t.shape(), "lin(b0,loop(lin(b1,br(b5,b2),b4)),b3)");
        assert_eq!(labels, ["entry", "head", "arc5", "body", "tail4", "done"]);
    }

    #[test]
    fn unstructured_is_rejected() {
        let m = parse("define i64 @f(i1 %c) {\ne:\n  branch i1 %c, [%a, %j]\na:\n  br label %j\nj:\n  ret 0\n}").unwrap();
        assert!(structural_analysis(m.functions[0].body.as_ref().unwrap()).is_err());
    }
}
