//! Control-flow restructuring.
//!
//! Produces a CFG in which every loop is tail-controlled with a single entry
//! and a single exit, and every branch has a symmetric split and join with
//! each alternative forming a single-entry/single-exit region. Blocks are
//! never duplicated. Instead, irregular entries, exits and joins are
//! funnelled through integer selector variables and fresh multiplexing
//! blocks.
//!
//! Loop restructuring works on strongly connected components. For each
//! non-trivial component it creates (when needed) an entry multiplexer
//! branching on a selector `q`, a tail block branching on a repetition flag
//! `r` (1 repeats), and an exit multiplexer branching on a selector `x`.
//! Repetition and exit arcs assign those variables on the way to the tail.
//! The body, without the tail, is then restructured recursively.
//!
//! Branch restructuring walks the acyclic skeleton from the entry. At each
//! split it computes, per outgoing arc, the blocks dominated by that arc.
//! All arcs leaving those sets meet at one continuation point, which is a
//! new join multiplexer when there is more than one target.

use super::ssa::{variable_names, Fresh};
use crate::source::{Block, Cfg, Inst, InstKind, Operand, Term};
use crate::types::Type;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Debug)]
enum FTerm {
    Br(usize),
    Branch(Type, Operand, Vec<usize>),
    Ret(Option<Operand>),
}

impl FTerm {
    fn targets(&self) -> Vec<usize> {
        match self {
            FTerm::Br(t) => vec![*t],
            FTerm::Branch(_, _, ts) => ts.clone(),
            FTerm::Ret(_) => vec![],
        }
    }

    fn set_target(&mut self, i: usize, to: usize) {
        match self {
            FTerm::Br(t) => *t = to,
            FTerm::Branch(_, _, ts) => ts[i] = to,
            FTerm::Ret(_) => unreachable!("ret has no targets"),
        }
    }
}

#[derive(Clone, Debug)]
struct FBlock {
    label: String,
    insts: Vec<Inst>,
    term: FTerm,
}

/// Counters describing what restructuring inserted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CfrStats {
    pub blocks: usize,
    pub predicates: usize,
}

struct Flow {
    blocks: Vec<FBlock>,
    labels: BTreeSet<String>,
    fresh: Fresh,
    /// Restructured loops as `(head, tail)`.
    loops: Vec<(usize, usize)>,
    stats: CfrStats,
}

impl Flow {
    fn new(cfg: &Cfg) -> Flow {
        let map = cfg.label_map();
        let blocks = cfg
            .blocks
            .iter()
            .map(|b| FBlock {
                label: b.label.clone(),
                insts: b.insts.clone(),
                term: match &b.term {
                    Term::Br(l) => FTerm::Br(map[l]),
                    Term::Branch(t, o, ls) => FTerm::Branch(t.clone(), o.clone(), ls.iter().map(|l| map[l]).collect()),
                    Term::Ret(o) => FTerm::Ret(o.clone()),
                },
            })
            .collect();
        Flow {
            blocks,
            labels: cfg.blocks.iter().map(|b| b.label.clone()).collect(),
            fresh: Fresh::new(variable_names(cfg)),
            loops: Vec::new(),
            stats: CfrStats::default(),
        }
    }

    fn into_cfg(self) -> Cfg {
        let labels: Vec<String> = self.blocks.iter().map(|b| b.label.clone()).collect();
        let blocks = self
            .blocks
            .into_iter()
            .map(|b| Block {
                label: b.label,
                phis: vec![],
                insts: b.insts,
                term: match b.term {
                    FTerm::Br(t) => Term::Br(labels[t].clone()),
                    FTerm::Branch(ty, o, ts) => Term::Branch(ty, o, ts.iter().map(|t| labels[*t].clone()).collect()),
                    FTerm::Ret(o) => Term::Ret(o),
                },
            })
            .collect();
        Cfg { blocks }
    }

    fn new_block(&mut self, base: &str, insts: Vec<Inst>, term: FTerm) -> usize {
        let mut i = self.blocks.len();
        let label = loop {
            let l = format!("{base}{i}");
            if self.labels.insert(l.clone()) {
                break l;
            }
            i += 1;
        };
        self.blocks.push(FBlock { label, insts, term });
        self.stats.blocks += 1;
        self.blocks.len() - 1
    }

    fn selector(&mut self, base: &str) -> String {
        self.stats.predicates += 1;
        self.fresh.name(base)
    }

    /// Send arc `(u, i)` to `to`, executing `assigns` on the way. The
    /// assignments are appended to `u` when it ends in an unconditional
    /// jump; otherwise a new block is placed on the arc and returned.
    fn redirect(&mut self, u: usize, i: usize, assigns: Vec<Inst>, to: usize) -> Option<usize> {
        if matches!(self.blocks[u].term, FTerm::Br(_)) {
            self.blocks[u].insts.extend(assigns);
            self.blocks[u].term.set_target(i, to);
            None
        } else {
            let a = self.new_block("arc", assigns, FTerm::Br(to));
            self.blocks[u].term.set_target(i, a);
            Some(a)
        }
    }

    fn is_back_edge(&self, u: usize, v: usize) -> bool {
        self.loops.iter().any(|&(h, t)| t == u && h == v)
    }

    fn forward_succs(&self, u: usize) -> Vec<usize> {
        self.blocks[u].term.targets().into_iter().filter(|&v| !self.is_back_edge(u, v)).collect()
    }

    fn forward_preds(&self) -> Vec<BTreeSet<usize>> {
        let mut p = vec![BTreeSet::new(); self.blocks.len()];
        for u in 0..self.blocks.len() {
            for v in self.forward_succs(u) {
                p[v].insert(u);
            }
        }
        p
    }
}

fn assign(var: &str, ty: &Type, v: usize) -> Inst {
    Inst { dst: Some(var.to_string()), kind: InstKind::Copy(ty.clone(), Operand::Int(v as i64)) }
}

/// Non-trivial strongly connected components of the subgraph induced by
/// `region`, each sorted, ordered by smallest member.
fn loop_components(flow: &Flow, region: &BTreeSet<usize>) -> Vec<Vec<usize>> {
    let mut g = DiGraph::<usize, ()>::new();
    let mut idx = BTreeMap::new();
    for &b in region {
        idx.insert(b, g.add_node(b));
    }
    let mut self_loop = BTreeSet::new();
    for &b in region {
        for t in flow.blocks[b].term.targets() {
            if let Some(&j) = idx.get(&t) {
                g.add_edge(idx[&b], j, ());
                if t == b {
                    self_loop.insert(b);
                }
            }
        }
    }
    let mut out: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut v: Vec<usize> = c.into_iter().map(|n| g[n]).collect();
            v.sort();
            v
        })
        .filter(|c| c.len() > 1 || self_loop.contains(&c[0]))
        .collect();
    out.sort();
    out
}

fn restructure_loops(flow: &mut Flow, region: &mut BTreeSet<usize>, region_exit: usize) {
    for scc in loop_components(flow, region) {
        restructure_loop(flow, region, &scc, region_exit);
    }
}

fn restructure_loop(flow: &mut Flow, region: &mut BTreeSet<usize>, scc: &[usize], region_exit: usize) {
    let members: BTreeSet<usize> = scc.iter().copied().collect();
    let mut entry_arcs = Vec::new();
    let mut exit_arcs = Vec::new();
    let mut inner_arcs = Vec::new();
    for u in 0..flow.blocks.len() {
        for (i, v) in flow.blocks[u].term.targets().into_iter().enumerate() {
            match (members.contains(&u), members.contains(&v)) {
                (false, true) => entry_arcs.push((u, i, v)),
                (true, false) => exit_arcs.push((u, i, v)),
                (true, true) => inner_arcs.push((u, i, v)),
                _ => {}
            }
        }
    }
    let mut entries: Vec<usize> = Vec::new();
    for &(_, _, v) in &entry_arcs {
        if !entries.contains(&v) {
            entries.push(v);
        }
    }
    entries.sort();
    assert!(!entries.is_empty(), "loop without entry");
    let repeat_arcs: Vec<_> = inner_arcs.iter().copied().filter(|(_, _, v)| entries.contains(v)).collect();

    // Already tail-controlled: one entry, one repetition arc and one exit
    // arc, both leaving the same two-way branch.
    if entries.len() == 1 && repeat_arcs.len() == 1 && exit_arcs.len() == 1 {
        let t = repeat_arcs[0].0;
        let two_way = matches!(&flow.blocks[t].term, FTerm::Branch(_, _, ts) if ts.len() == 2);
        if exit_arcs[0].0 == t && two_way {
            flow.loops.push((entries[0], t));
            let mut body: BTreeSet<usize> = members.clone();
            body.remove(&t);
            restructure_loops(flow, &mut body, t);
            region.extend(body);
            return;
        }
    }

    let mut exits: Vec<usize> = Vec::new();
    for &(_, _, v) in &exit_arcs {
        if !exits.contains(&v) {
            exits.push(v);
        }
    }
    let mut body: BTreeSet<usize> = members.clone();
    let (head, q) = if entries.len() > 1 {
        let q = flow.selector("q");
        let ty = Type::narrowest_int(entries.len() as u32);
        let h = flow.new_block("loop", vec![], FTerm::Branch(ty.clone(), Operand::Var(q.clone()), entries.clone()));
        body.insert(h);
        (h, Some((q, ty)))
    } else {
        (entries[0], None)
    };
    let r = flow.selector("r");
    let i1 = Type::Int(1);
    let tail = flow.new_block("tail", vec![], FTerm::Br(head));
    let (exit_target, x) = match exits.len() {
        0 => (region_exit, None),
        1 => (exits[0], None),
        n => {
            let x = flow.selector("x");
            let ty = Type::narrowest_int(n as u32);
            let m = flow.new_block("exit", vec![], FTerm::Branch(ty.clone(), Operand::Var(x.clone()), exits.clone()));
            region.insert(m);
            (m, Some((x, ty)))
        }
    };
    flow.blocks[tail].term = FTerm::Branch(i1.clone(), Operand::Var(r.clone()), vec![exit_target, head]);

    if let Some((q, ty)) = &q {
        for &(u, i, v) in &entry_arcs {
            let sel = entries.iter().position(|e| *e == v).unwrap();
            if let Some(a) = flow.redirect(u, i, vec![assign(q, ty, sel)], head) {
                region.insert(a);
            }
        }
    }
    for &(u, i, v) in &repeat_arcs {
        let mut a = vec![assign(&r, &i1, 1)];
        if let Some((q, ty)) = &q {
            a.push(assign(q, ty, entries.iter().position(|e| *e == v).unwrap()));
        }
        body.extend(flow.redirect(u, i, a, tail));
    }
    for &(u, i, v) in &exit_arcs {
        let mut a = vec![assign(&r, &i1, 0)];
        if let Some((x, ty)) = &x {
            a.push(assign(x, ty, exits.iter().position(|e| *e == v).unwrap()));
        }
        body.extend(flow.redirect(u, i, a, tail));
    }
    flow.loops.push((head, tail));
    restructure_loops(flow, &mut body, tail);
    region.extend(body);
    region.insert(tail);
}

/// Restructure branches in the region from `entry` to `exit` (both
/// inclusive). `skip_loop` suppresses treating `entry` as a loop header,
/// which is used when processing that loop's own body.
fn restructure_branches(flow: &mut Flow, entry: usize, exit: usize, skip_loop: bool) {
    let mut cur = entry;
    let mut first = true;
    loop {
        if !(first && skip_loop) {
            if let Some(&(_, tail)) = flow.loops.iter().find(|(h, _)| *h == cur) {
                restructure_branches(flow, cur, tail, true);
                if tail == exit {
                    return;
                }
                let next = flow.forward_succs(tail);
                assert_eq!(next.len(), 1, "loop tail with several exits");
                cur = next[0];
                first = false;
                continue;
            }
        }
        first = false;
        if cur == exit {
            return;
        }
        let succs = flow.forward_succs(cur);
        match succs.len() {
            0 => return,
            1 => cur = succs[0],
            _ => cur = restructure_branch(flow, cur, exit),
        }
    }
}

/// Blocks dominated by the arc from `split` to `target`.
fn arc_dominated(flow: &Flow, preds: &[BTreeSet<usize>], split: usize, target: usize, exit: usize, dup: bool) -> BTreeSet<usize> {
    let mut set = BTreeSet::new();
    if dup || target == exit || preds[target].iter().any(|&p| p != split) {
        return set;
    }
    set.insert(target);
    let mut work = vec![target];
    while let Some(w) = work.pop() {
        for v in flow.forward_succs(w) {
            if v != exit && !set.contains(&v) && preds[v].iter().all(|p| set.contains(p)) {
                set.insert(v);
                work.push(v);
            }
        }
    }
    set
}

fn restructure_branch(flow: &mut Flow, split: usize, exit: usize) -> usize {
    let targets = flow.blocks[split].term.targets();
    let preds = flow.forward_preds();
    let doms: Vec<BTreeSet<usize>> = targets
        .iter()
        .map(|&t| {
            let dup = targets.iter().filter(|&&u| u == t).count() > 1;
            arc_dominated(flow, &preds, split, t, exit, dup)
        })
        .collect();
    // Arcs leaving each alternative, as (source, target index, target).
    let mut outs: Vec<Vec<(usize, usize, usize)>> = Vec::new();
    let mut conts: Vec<usize> = Vec::new();
    for (i, h) in doms.iter().enumerate() {
        let arcs: Vec<_> = if h.is_empty() {
            vec![(split, i, targets[i])]
        } else {
            h.iter()
                .flat_map(|&w| {
                    let ts = flow.blocks[w].term.targets();
                    ts.into_iter().enumerate().filter(|(_, v)| !h.contains(v)).map(move |(j, v)| (w, j, v)).collect::<Vec<_>>()
                })
                .collect()
        };
        for &(_, _, v) in &arcs {
            if !conts.contains(&v) {
                conts.push(v);
            }
        }
        outs.push(arcs);
    }
    let sel = if conts.len() > 1 {
        let p = flow.selector("p");
        let ty = Type::narrowest_int(conts.len() as u32);
        let j = flow.new_block("join", vec![], FTerm::Branch(ty.clone(), Operand::Var(p.clone()), conts.clone()));
        Some((p, ty, j))
    } else {
        None
    };
    let cont = sel.as_ref().map(|s| s.2).unwrap_or(conts[0]);
    let assigns = |v: usize| -> Vec<Inst> {
        match &sel {
            Some((p, ty, _)) => vec![assign(p, ty, conts.iter().position(|c| *c == v).unwrap())],
            None => vec![],
        }
    };
    let mut alternatives = Vec::new();
    for (i, h) in doms.iter().enumerate() {
        if h.is_empty() {
            let b = flow.new_block("alt", assigns(targets[i]), FTerm::Br(cont));
            flow.blocks[split].term.set_target(i, b);
            alternatives.push((b, b));
            continue;
        }
        let arcs = &outs[i];
        if arcs.len() == 1 && matches!(flow.blocks[arcs[0].0].term, FTerm::Br(_)) {
            let (w, j, v) = arcs[0];
            flow.redirect(w, j, assigns(v), cont);
            alternatives.push((targets[i], w));
            continue;
        }
        let e = flow.new_block("alt", vec![], FTerm::Br(cont));
        for &(w, j, v) in arcs {
            let a = assigns(v);
            if a.is_empty() {
                flow.blocks[w].term.set_target(j, e);
            } else {
                flow.redirect(w, j, a, e);
            }
        }
        alternatives.push((targets[i], e));
    }
    for (entry, end) in alternatives {
        restructure_branches(flow, entry, end, false);
    }
    cont
}

/// Restructure a normalized, phi-free CFG with a single `ret` block.
pub fn restructure(cfg: &Cfg) -> (Cfg, CfrStats) {
    let mut flow = Flow::new(cfg);
    let exit = (0..flow.blocks.len()).find(|&b| matches!(flow.blocks[b].term, FTerm::Ret(_))).expect("CFG without ret");
    let mut region: BTreeSet<usize> = (0..flow.blocks.len()).collect();
    restructure_loops(&mut flow, &mut region, exit);
    restructure_branches(&mut flow, 0, exit, false);
    let stats = flow.stats.clone();
    (flow.into_cfg(), stats)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::construct::ssa::normalize;
    use crate::interp::{eval_cfg, Value, DEFAULT_FUEL};
    use crate::source::{parse, print::print_cfg, validate_cfg, Mode, Module};

    pub(crate) const GCD: &str = "define i64 @gcd(i64 %a, i64 %b) {
entry:
  br label %head
head:
  %c = ne i64 %b, 0
  branch i1 %c, [%done, %body]
body:
  %t = rem i64 %a, %b
  %a = copy i64 %b
  %b = copy i64 %t
  br label %head
done:
  ret %a
}";

    fn restructured(m: &Module) -> Module {
        let mut m = m.clone();
        for f in &mut m.functions {
            if let Some(body) = &f.body {
                let n = normalize(f.ret.as_ref(), body);
                f.body = Some(restructure(&n).0);
            }
        }
        m
    }

    fn text(m: &Module) -> String {
        let mut s = String::new();
        print_cfg(m.functions[0].body.as_ref().unwrap(), &mut s);
        s
    }

    #[test]
    fn gcd_becomes_tail_controlled() {
        let m = parse(GCD).unwrap();
        let r = restructured(&m);
        let expected = "entry:
  br label %head
head:
  %c = ne i64 %b, 0
  branch i1 %c, [%arc5, %body]
body:
  %t = rem i64 %a, %b
  %a = copy i64 %b
  %b = copy i64 %t
  %r.0 = copy i1 1
  br label %tail4
done:
  ret %a
tail4:
  branch i1 %r.0, [%done, %head]
arc5:
  %r.0 = copy i1 0
  br label %tail4
";
        assert_eq!(text(&r), expected);
        assert!(validate_cfg(&r.functions[0], Mode::NonSsa).is_empty());
        for (a, b) in [(12, 8), (7, 0), (0, 5), (35, 21)] {
            let args = [Value::i64(a), Value::i64(b)];
            assert_eq!(eval_cfg(&m, "gcd", &args, DEFAULT_FUEL), eval_cfg(&r, "gcd", &args, DEFAULT_FUEL));
        }
    }

    #[test]
    fn do_while_is_kept() {
        let src = "define i64 @f(i64 %n) {
entry:
  br label %l
l:
  %n = sub i64 %n, 1
  %c = gt i64 %n, 0
  branch i1 %c, [%x, %l]
x:
  ret %n
}";
        let m = parse(src).unwrap();
        let r = restructured(&m);
        assert_eq!(r, m);
    }

    #[test]
    fn irreducible_loop() {
        let src = "define i64 @f(i64 %n, i1 %c) {
entry:
  %i = copy i64 0
  branch i1 %c, [%a, %b]
a:
  %i = add i64 %i, 1
  br label %b
b:
  %i = add i64 %i, 2
  %d = lt i64 %i, %n
  branch i1 %d, [%x, %a]
x:
  ret %i
}";
        let m = parse(src).unwrap();
        let r = restructured(&m);
        assert!(validate_cfg(&r.functions[0], Mode::NonSsa).is_empty(), "{}", text(&r));
        for n in -2..12 {
            for c in 0..2 {
                let args = [Value::i64(n), Value::int(1, c)];
                assert_eq!(eval_cfg(&m, "f", &args, DEFAULT_FUEL), eval_cfg(&r, "f", &args, DEFAULT_FUEL));
            }
        }
    }
}
