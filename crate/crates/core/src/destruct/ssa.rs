//! SSA construction for recovered CFGs.
//!
//! Phis are placed on the iterated dominance frontiers of each variable's
//! definition sites, restricted to variables that are live across some block
//! boundary (semi-pruned form). Renaming walks the dominator tree and gives
//! the k-th definition of `%x` the name `%x.k`. A use with no reaching
//! definition reads `undef`.

use crate::source::dom::DomTree;
use crate::source::{Block, Cfg, Operand, Phi};
use crate::types::Type;
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Drop blocks that cannot be reached from the entry.
pub fn remove_unreachable(cfg: &Cfg) -> Cfg {
    let live = cfg.reachable();
    Cfg { blocks: cfg.blocks.iter().zip(live).filter(|(_, l)| *l).map(|(b, _)| b.clone()).collect() }
}

fn dedup(v: &[usize]) -> Vec<usize> {
    let mut seen = BTreeSet::new();
    v.iter().copied().filter(|x| seen.insert(*x)).collect()
}

/// Variables read in some block before that block defines them.
fn block_globals(cfg: &Cfg) -> BTreeSet<String> {
    let mut globals = BTreeSet::new();
    for b in &cfg.blocks {
        let mut killed: BTreeSet<&str> = BTreeSet::new();
        for i in &b.insts {
            for o in i.kind.operands() {
                if let Some(v) = o.var() {
                    if !killed.contains(v) {
                        globals.insert(v.to_string());
                    }
                }
            }
            if let Some(d) = &i.dst {
                killed.insert(d);
            }
        }
        if let Some(v) = b.term.operand().and_then(Operand::var) {
            if !killed.contains(v) {
                globals.insert(v.to_string());
            }
        }
    }
    globals
}

struct Renamer<'a> {
    blocks: Vec<Block>,
    /// Original variable of each phi, parallel to `blocks[b].phis`.
    phi_vars: Vec<Vec<String>>,
    succ: &'a [Vec<usize>],
    children: Vec<Vec<usize>>,
    stacks: HashMap<String, Vec<String>>,
    counter: HashMap<String, usize>,
}

impl Renamer<'_> {
    fn fresh(&mut self, v: &str) -> String {
        let k = self.counter.entry(v.to_string()).or_insert(0);
        *k += 1;
        let name = format!("{v}.{k}");
        self.stacks.entry(v.to_string()).or_default().push(name.clone());
        name
    }

    fn current(&self, v: &str) -> Operand {
        match self.stacks.get(v).and_then(|s| s.last()) {
            Some(n) => Operand::Var(n.clone()),
            None => Operand::Undef,
        }
    }

    fn rewrite(&self, o: &mut Operand) {
        if let Operand::Var(v) = o {
            *o = self.current(v);
        }
    }

    /// Rename one block; returns the variables whose stacks it pushed.
    fn block(&mut self, b: usize) -> Vec<String> {
        let mut pushed = Vec::new();
        for j in 0..self.blocks[b].phis.len() {
            let v = self.phi_vars[b][j].clone();
            self.blocks[b].phis[j].dst = self.fresh(&v);
            pushed.push(v);
        }
        for j in 0..self.blocks[b].insts.len() {
            let mut kind = self.blocks[b].insts[j].kind.clone();
            for o in kind.operands_mut() {
                self.rewrite(o);
            }
            self.blocks[b].insts[j].kind = kind;
            if let Some(v) = self.blocks[b].insts[j].dst.clone() {
                self.blocks[b].insts[j].dst = Some(self.fresh(&v));
                pushed.push(v);
            }
        }
        let mut term = self.blocks[b].term.clone();
        if let Some(o) = term.operand_mut() {
            self.rewrite(o);
        }
        self.blocks[b].term = term;
        let label = self.blocks[b].label.clone();
        for &s in &self.succ[b] {
            for j in 0..self.blocks[s].phis.len() {
                let value = self.current(&self.phi_vars[s][j]);
                self.blocks[s].phis[j].incoming.push((value, label.clone()));
            }
        }
        pushed
    }

    fn run(&mut self) {
        // Iterative dominator-tree walk: (block, pushed names) frames.
        let mut stack: Vec<(usize, Option<Vec<String>>)> = vec![(0, None)];
        while let Some((b, pushed)) = stack.pop() {
            match pushed {
                None => {
                    let p = self.block(b);
                    stack.push((b, Some(p)));
                    for &c in self.children[b].iter().rev() {
                        stack.push((c, None));
                    }
                }
                Some(p) => {
                    for v in p {
                        self.stacks.get_mut(&v).unwrap().pop();
                    }
                }
            }
        }
    }
}

/// Convert a phi-free CFG with the given parameters into SSA form.
pub fn construct_ssa(params: &[(String, Type)], cfg: &Cfg) -> Cfg {
    let cfg = remove_unreachable(cfg);
    assert!(!cfg.has_phis(), "construct_ssa expects a phi-free CFG");
    let n = cfg.blocks.len();
    let succ: Vec<Vec<usize>> = cfg.successors().iter().map(|s| dedup(s)).collect();
    let preds: Vec<Vec<usize>> = cfg.predecessors().iter().map(|p| dedup(p)).collect();
    let dom = DomTree::new(&succ, 0);
    let df = dom.frontiers(&preds);

    let mut types: BTreeMap<String, Type> = params.iter().cloned().collect();
    let mut defsites: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for (p, _) in params {
        defsites.entry(p.clone()).or_default().insert(0);
    }
    for (b, blk) in cfg.blocks.iter().enumerate() {
        for i in &blk.insts {
            if let (Some(d), Some(t)) = (&i.dst, i.kind.result_type()) {
                types.insert(d.clone(), t);
                defsites.entry(d.clone()).or_default().insert(b);
            }
        }
    }

    let mut blocks = cfg.blocks.clone();
    let mut phi_vars: Vec<Vec<String>> = vec![Vec::new(); n];
    for v in block_globals(&cfg) {
        let Some(sites) = defsites.get(&v) else { continue };
        let mut has_phi = vec![false; n];
        let mut work: Vec<usize> = sites.iter().copied().collect();
        let mut queued: BTreeSet<usize> = sites.clone();
        while let Some(b) = work.pop() {
            for &d in &df[b] {
                if has_phi[d] {
                    continue;
                }
                has_phi[d] = true;
                blocks[d].phis.push(Phi { dst: v.clone(), ty: types[&v].clone(), incoming: Vec::new() });
                phi_vars[d].push(v.clone());
                if queued.insert(d) {
                    work.push(d);
                }
            }
        }
    }

    // Parameters keep their names; later definitions get fresh ones.
    let stacks: HashMap<String, Vec<String>> = params.iter().map(|(p, _)| (p.clone(), vec![p.clone()])).collect();
    let mut r = Renamer { blocks, phi_vars, succ: &succ, children: dom.children(), stacks, counter: HashMap::new() };
    r.run();
    Cfg { blocks: r.blocks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{parse, validate_module, Mode};

    fn convert(src: &str) -> crate::source::Module {
        let mut m = parse(src).unwrap();
        for f in &mut m.functions {
            if let Some(b) = &f.body {
                f.body = Some(construct_ssa(&f.params, b));
            }
        }
        m
    }

    #[test]
    fn straight_line_is_only_renamed() {
        let m = convert("export define i64 @f(i64 %a) {\n  %x = add i64 %a, 1\n  %x = mul i64 %x, %x\n  ret %x\n}");
        assert!(validate_module(&m, Mode::Ssa).is_empty());
        let cfg = m.functions[0].body.as_ref().unwrap();
        assert_eq!(cfg.blocks.len(), 1);
        assert!(!cfg.has_phis());
        let dsts: Vec<_> = cfg.blocks[0].insts.iter().map(|i| i.dst.clone().unwrap()).collect();
        assert_eq!(dsts, ["x.1", "x.2"]);
    }

    #[test]
    fn counter_loop_gets_one_phi_at_its_head() {
        let m = convert(
            "export define i64 @f(i64 %n) {
entry:
  %i = copy i64 0
  br label %head
head:
  %i = add i64 %i, 1
  %c = lt i64 %i, %n
  branch i1 %c, [%out, %head]
out:
  ret %i
}",
        );
        assert!(validate_module(&m, Mode::Ssa).is_empty(), "{:?}", validate_module(&m, Mode::Ssa));
        let cfg = m.functions[0].body.as_ref().unwrap();
        let phis: Vec<usize> = cfg.blocks.iter().map(|b| b.phis.len()).collect();
        assert_eq!(phis, [0, 1, 0]);
        assert_eq!(cfg.blocks[1].phis[0].incoming.len(), 2);
    }
}
