//! Common node elimination.
//!
//! The mark phase computes a congruence relation over the origins of each
//! region by value numbering in topological order: two simple nodes are
//! congruent when they perform the same operation on congruent inputs
//! (commutative inputs sorted). Entry and context arguments fed by congruent
//! origins are congruent, as are γ exit variables whose results are
//! congruent in every alternative. θ loop variables are handled optimistically:
//! variables with congruent inputs start in one class, and classes are split
//! until the body's results agree. The divert phase then sends all users of a
//! class to its member with the lowest node id (or lowest port index for
//! arguments and structural outputs).
//!
//! Alloca, store and apply nodes are never merged. Loads are merged only when
//! both the address and the memory state are congruent.

use crate::graph::topo::topo;
use crate::graph::views;
use crate::graph::{Graph, NodeId, NodeKind, Op, Origin, RegionId};
use std::collections::{BTreeMap, HashMap};

#[derive(Default)]
struct Congruence {
    /// Origin to the canonical (first seen) member of its class.
    class: HashMap<Origin, Origin>,
}

impl Congruence {
    fn of(&self, o: Origin) -> Origin {
        self.class.get(&o).copied().unwrap_or(o)
    }

    fn number_region(&mut self, g: &Graph, r: RegionId) {
        let mut table: HashMap<(Op, Vec<Origin>), NodeId> = HashMap::new();
        for n in topo(g, r) {
            match g.kind(n) {
                NodeKind::Simple(op) => {
                    if matches!(op, Op::Alloca { .. } | Op::Store(_) | Op::Apply(_)) {
                        continue;
                    }
                    let mut ins: Vec<Origin> = g.inputs(n).into_iter().map(|o| self.of(o)).collect();
                    if op.commutative() {
                        ins[..2].sort();
                    }
                    match table.get(&(op.clone(), ins.clone())) {
                        Some(&m) => {
                            for i in 0..g.num_outputs(n) as u32 {
                                self.class.insert(Origin::Out(n, i), Origin::Out(m, i));
                            }
                        }
                        None => {
                            // Clear stale classes left by an earlier θ round.
                            for i in 0..g.num_outputs(n) as u32 {
                                self.class.remove(&Origin::Out(n, i));
                            }
                            table.insert((op.clone(), ins), n);
                        }
                    }
                }
                NodeKind::Gamma => self.number_gamma(g, n),
                NodeKind::Theta => self.number_theta(g, n),
                NodeKind::Lambda { .. } | NodeKind::Delta { .. } | NodeKind::Phi => {
                    let body = g.subregions(n)[0];
                    self.group_args(g, n, body, 0, views::num_context_vars(g, n));
                    self.number_region(g, body);
                }
            }
        }
    }

    /// Arguments `0..count` of `body` become congruent when the inputs of
    /// `n` feeding them (input `l + input_offset`) are.
    fn group_args(&mut self, g: &Graph, n: NodeId, body: RegionId, input_offset: usize, count: usize) {
        let mut seen: HashMap<Origin, Origin> = HashMap::new();
        for l in 0..count {
            let arg = Origin::Arg(body, l as u32);
            let key = self.of(g.input(n, l + input_offset));
            let canon = *seen.entry(key).or_insert(arg);
            if canon == arg {
                self.class.remove(&arg);
            } else {
                self.class.insert(arg, canon);
            }
        }
    }

    fn number_gamma(&mut self, g: &Graph, n: NodeId) {
        let ev = views::num_entry_vars(g, n);
        let regions = g.subregions(n).to_vec();
        for &r in &regions {
            self.group_args(g, n, r, 1, ev);
            self.number_region(g, r);
        }
        let mut seen: HashMap<Vec<Option<Origin>>, Origin> = HashMap::new();
        for l in 0..g.num_outputs(n) {
            let sig: Vec<Option<Origin>> = regions.iter().map(|&r| g.result(r, l).map(|o| self.of(o))).collect();
            let out = Origin::Out(n, l as u32);
            let canon = *seen.entry(sig).or_insert(out);
            if canon == out {
                self.class.remove(&out);
            } else {
                self.class.insert(out, canon);
            }
        }
    }

    fn number_theta(&mut self, g: &Graph, n: NodeId) {
        let body = g.subregions(n)[0];
        let lv = views::num_loop_vars(g, n);
        // Partition of loop variables into classes, as dense class indices.
        let mut part: Vec<usize> = dense(&(0..lv).map(|l| self.of(g.input(n, l))).collect::<Vec<_>>());
        loop {
            let mut first: Vec<Option<usize>> = vec![None; lv];
            for l in 0..lv {
                let c = part[l];
                let canon = *first[c].get_or_insert(l);
                let arg = Origin::Arg(body, l as u32);
                if canon == l {
                    self.class.remove(&arg);
                } else {
                    self.class.insert(arg, Origin::Arg(body, canon as u32));
                }
            }
            self.number_region(g, body);
            let refined: Vec<(usize, Option<Origin>)> = (0..lv).map(|l| (part[l], g.result(body, l + 1).map(|o| self.of(o)))).collect();
            let next = dense(&refined);
            let stable = next.iter().max() == part.iter().max();
            part = next;
            if stable {
                break;
            }
        }
        let mut first: Vec<Option<usize>> = vec![None; lv];
        for l in 0..lv {
            let canon = *first[part[l]].get_or_insert(l);
            let out = Origin::Out(n, l as u32);
            if canon == l {
                self.class.remove(&out);
            } else {
                self.class.insert(out, Origin::Out(n, canon as u32));
            }
        }
    }
}

/// Map keys to dense class indices in order of first appearance.
fn dense<K: Clone + Eq + std::hash::Hash>(keys: &[K]) -> Vec<usize> {
    let mut ids: HashMap<K, usize> = HashMap::new();
    keys.iter()
        .map(|k| {
            let next = ids.len();
            *ids.entry(k.clone()).or_insert(next)
        })
        .collect()
}

fn rank(o: Origin) -> (u32, u32, u32) {
    match o {
        Origin::Out(n, i) => (1, n.0, i),
        Origin::Arg(r, i) => (0, r.0, i),
    }
}

/// Congruence classes with more than one member, each sorted so that the
/// representative comes first.
pub fn classes(g: &Graph) -> Vec<Vec<Origin>> {
    let mut c = Congruence::default();
    c.number_region(g, g.root());
    let mut groups: BTreeMap<Origin, Vec<Origin>> = BTreeMap::new();
    for (&o, &canon) in &c.class {
        groups.entry(canon).or_insert_with(|| vec![canon]).push(o);
    }
    groups
        .into_values()
        .map(|mut v| {
            v.sort_by_key(|&o| rank(o));
            v
        })
        .collect()
}

/// Divert all users of congruent origins to one representative; returns
/// the number of origins diverted.
pub fn cne(g: &mut Graph) -> usize {
    let mut count = 0;
    for class in classes(g) {
        let rep = class[0];
        for &o in &class[1..] {
            g.divert_users(o, rep).expect("congruent origins share region and type");
            count += 1;
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::construct;
    use crate::graph::{validate, BinOp};
    use crate::opt::dne::dne;
    use crate::source::parse;

    fn count_op(g: &Graph, pred: impl Fn(&Op) -> bool) -> usize {
        g.node_ids().filter(|&n| g.op(n).is_some_and(&pred)).count()
    }

    fn fixture(name: &str) -> Graph {
        let path = format!("{}/corpus/{name}.ir", env!("CARGO_MANIFEST_DIR"));
        let m = parse(&std::fs::read_to_string(path).unwrap()).unwrap();
        construct(&m).unwrap().graph
    }

    #[test]
    fn four_multiplications_become_three() {
        let mut g = fixture("cne_kernel");
        let is_mul = |op: &Op| matches!(op, Op::Bin(BinOp::Mul, _));
        assert_eq!(count_op(&g, is_mul), 4);
        cne(&mut g);
        dne(&mut g);
        assert!(validate(&g).is_empty());
        assert_eq!(count_op(&g, is_mul), 3);
    }

    #[test]
    fn loads_with_different_states_stay_apart() {
        let mut g = fixture("loads");
        let is_load = |op: &Op| matches!(op, Op::Load(_));
        assert_eq!(count_op(&g, is_load), 2);
        cne(&mut g);
        dne(&mut g);
        assert_eq!(count_op(&g, is_load), 2);
    }

    #[test]
    fn duplicate_constants_collapse() {
        let src = "export define i64 @f(i64 %a) {\n  %x = add i64 %a, 7\n  %y = mul i64 %x, 7\n  ret %y\n}";
        let mut g = construct(&parse(src).unwrap()).unwrap().graph;
        let consts = |g: &Graph| count_op(g, |op| op.is_const());
        assert_eq!(consts(&g), 2);
        cne(&mut g);
        dne(&mut g);
        assert_eq!(consts(&g), 1);
    }

    #[test]
    fn congruent_loop_variables_merge() {
        let src = "export define i64 @f(i64 %n) {
entry:
  %a = copy i64 0
  %b = copy i64 0
  %i = copy i64 0
  br label %loop
loop:
  %a = add i64 %a, %i
  %b = add i64 %b, %i
  %i = add i64 %i, 1
  %c = lt i64 %i, %n
  branch i1 %c, [%out, %loop]
out:
  %r = sub i64 %a, %b
  ret %r
}";
        let mut g = construct(&parse(src).unwrap()).unwrap().graph;
        let before = classes(&g).len();
        assert!(before > 0);
        cne(&mut g);
        dne(&mut g);
        assert!(validate(&g).is_empty());
        // a and b are one loop variable now, so the final sub reads it twice.
        let sub = g.node_ids().find(|&n| matches!(g.op(n), Some(Op::Bin(BinOp::Sub, _)))).unwrap();
        assert_eq!(g.input(sub, 0), g.input(sub, 1));
    }
}
