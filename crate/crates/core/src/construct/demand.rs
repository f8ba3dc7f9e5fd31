//! Demand annotation of control trees: read/write sets bottom-up, then
//! demand sets in a traversal that mirrors a backward walk of the CFG.
//!
//! The tail block of a loop additionally reads and writes the io state, so
//! every θ threads io and the possibility of non-termination stays ordered
//! with other io effects.

use super::structure::{Tree, TreeKind};
use crate::source::{Cfg, IO_VAR};
use std::collections::BTreeSet;

pub type VarSet = BTreeSet<String>;

/// Upward-exposed reads and writes of block `b`. With `stateless`, the
/// state pseudo-variables are left out.
pub fn block_rw(cfg: &Cfg, b: usize, loop_tail: bool, stateless: bool) -> (VarSet, VarSet) {
    let blk = &cfg.blocks[b];
    let mut r: VarSet = blk.term.reads().into_iter().collect();
    let mut w = VarSet::new();
    if loop_tail {
        r.insert(IO_VAR.to_string());
        w.insert(IO_VAR.to_string());
    }
    for i in blk.insts.iter().rev() {
        let wi = i.writes();
        for v in &wi {
            r.remove(v);
        }
        r.extend(i.reads());
        w.extend(wi);
    }
    if stateless {
        r.retain(|v| !v.starts_with('!'));
        w.retain(|v| !v.starts_with('!'));
    }
    (r, w)
}

fn read_write(t: &mut Tree, cfg: &Cfg, tail: Option<usize>, stateless: bool) {
    match t.kind {
        TreeKind::Block(b) => {
            let (r, w) = block_rw(cfg, b, tail == Some(b), stateless);
            t.reads = r;
            t.writes = w;
        }
        TreeKind::Linear => {
            let n = t.children.len();
            for (i, c) in t.children.iter_mut().enumerate() {
                // Only the last child of a linear node can hold the tail.
                read_write(c, cfg, if i + 1 == n { tail } else { None }, stateless);
            }
            let (mut r, mut w) = (VarSet::new(), VarSet::new());
            for c in t.children.iter().rev() {
                r = &(&r - &c.writes) | &c.reads;
                w.extend(c.writes.iter().cloned());
            }
            t.reads = r;
            t.writes = w;
        }
        TreeKind::Branch => {
            for c in &mut t.children {
                read_write(c, cfg, None, stateless);
            }
            t.reads = t.children.iter().flat_map(|c| c.reads.iter().cloned()).collect();
            let mut w = t.children[0].writes.clone();
            for c in &t.children[1..] {
                w = &w & &c.writes;
            }
            t.writes = w;
        }
        TreeKind::Loop => {
            let last = *t.children[0].blocks().last().unwrap();
            read_write(&mut t.children[0], cfg, Some(last), stateless);
            t.reads = t.children[0].reads.clone();
            t.writes = t.children[0].writes.clone();
        }
    }
}

fn demand(t: &mut Tree, dt: &mut VarSet) {
    t.demand_out = dt.clone();
    match t.kind {
        TreeKind::Block(_) => {
            *dt = &(&t.demand_out - &t.writes) | &t.reads;
        }
        TreeKind::Linear => {
            for c in t.children.iter_mut().rev() {
                demand(c, dt);
            }
        }
        TreeKind::Branch => {
            let mut d = VarSet::new();
            for c in &mut t.children {
                let mut copy = t.demand_out.clone();
                demand(c, &mut copy);
                d.extend(copy);
            }
            *dt = d;
        }
        TreeKind::Loop => {
            // Everything the body needs at its entry is a loop variable and
            // so needs a value on entry as well, including variables an inner
            // loop carries through.
            let mut d: VarSet = &*dt | &t.reads;
            loop {
                let mut inner = d.clone();
                demand(&mut t.children[0], &mut inner);
                if inner.is_subset(&d) {
                    break;
                }
                d.extend(inner);
            }
            *dt = d;
        }
    }
    t.demand = dt.clone();
}

/// Fill in read, write and demand sets of every node.
pub fn annotate(tree: &mut Tree, cfg: &Cfg, stateless: bool) {
    read_write(tree, cfg, None, stateless);
    let mut dt = VarSet::new();
    demand(tree, &mut dt);
}

/// Reference read/write sets of the region formed by `blocks`, computed by
/// a dataflow fixpoint on the CFG rather than from the tree. The region is
/// entered at any of `entries` (several for the alternatives of a branch);
/// arcs back to an entry and arcs leaving the region are ignored.
pub fn region_rw_oracle(cfg: &Cfg, blocks: &[usize], entries: &[usize], tails: &BTreeSet<usize>, stateless: bool) -> (VarSet, VarSet) {
    let set: BTreeSet<usize> = blocks.iter().copied().collect();
    let succ = cfg.successors();
    let local: Vec<Vec<usize>> =
        (0..cfg.blocks.len()).map(|b| succ[b].iter().copied().filter(|s| set.contains(s) && !entries.contains(s)).collect()).collect();
    let rw: Vec<(VarSet, VarSet)> = (0..cfg.blocks.len())
        .map(|b| if set.contains(&b) { block_rw(cfg, b, tails.contains(&b), stateless) } else { Default::default() })
        .collect();
    // Upward-exposed reads: live-in with nothing live after the region.
    let mut live: Vec<VarSet> = vec![VarSet::new(); cfg.blocks.len()];
    // Must-writes: written on every path from the block to the region end.
    let all: VarSet = blocks.iter().flat_map(|&b| rw[b].1.iter().cloned()).collect();
    let mut must: Vec<VarSet> = (0..cfg.blocks.len()).map(|_| all.clone()).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for &b in blocks.iter().rev() {
            let mut out = VarSet::new();
            for &s in &local[b] {
                out.extend(live[s].iter().cloned());
            }
            let new_live = &(&out - &rw[b].1) | &rw[b].0;
            let mut m: Option<VarSet> = None;
            for &s in &local[b] {
                m = Some(match m {
                    None => must[s].clone(),
                    Some(x) => &x & &must[s],
                });
            }
            let new_must = &m.unwrap_or_default() | &rw[b].1;
            if new_live != live[b] || new_must != must[b] {
                live[b] = new_live;
                must[b] = new_must;
                changed = true;
            }
        }
    }
    let reads = entries.iter().flat_map(|&e| live[e].iter().cloned()).collect();
    let writes = entries.iter().map(|&e| must[e].clone()).reduce(|a, b| &a & &b).unwrap_or_default();
    (reads, writes)
}

/// Nodes of `tree` whose read or write set differs from
/// [`region_rw_oracle`], rendered as `shape: tree vs oracle`.
pub fn oracle_mismatches(tree: &Tree, cfg: &Cfg, stateless: bool) -> Vec<String> {
    fn tails(t: &Tree, out: &mut BTreeSet<usize>) {
        if t.kind == TreeKind::Loop {
            out.insert(*t.blocks().last().unwrap());
        }
        t.children.iter().for_each(|c| tails(c, out));
    }
    fn check(t: &Tree, cfg: &Cfg, tails: &BTreeSet<usize>, stateless: bool, out: &mut Vec<String>) {
        let entries: Vec<usize> = match t.kind {
            TreeKind::Branch => t.children.iter().map(Tree::first_block).collect(),
            _ => vec![t.first_block()],
        };
        let (r, w) = region_rw_oracle(cfg, &t.blocks(), &entries, tails, stateless);
        if (&t.reads, &t.writes) != (&r, &w) {
            out.push(format!("{}: R={:?} W={:?} vs R={r:?} W={w:?}", t.shape(), t.reads, t.writes));
        }
        t.children.iter().for_each(|c| check(c, cfg, tails, stateless, out));
    }
    let mut ts = BTreeSet::new();
    tails(tree, &mut ts);
    let mut out = Vec::new();
    check(tree, cfg, &ts, stateless, &mut out);
    out
}
