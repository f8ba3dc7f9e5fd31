//! Dead node elimination.
//!
//! A mark phase walks backwards from the exports and collects every origin
//! whose value can reach one. The sweep then removes dead nodes and trims
//! dead entry, exit, loop, context and recursion variables off live
//! structural nodes, innermost regions included.

use crate::graph::topo::topo;
use crate::graph::views::{self, arg_role, ArgRole};
use crate::graph::{Graph, NodeId, NodeKind, Origin, RegionId};
use std::collections::HashSet;

/// Origins whose values are demanded by an export.
pub fn mark(g: &Graph) -> HashSet<Origin> {
    let mut live: HashSet<Origin> = HashSet::new();
    let mut work: Vec<Origin> = g.region(g.root()).results.iter().filter_map(|s| s.origin).collect();
    let mut live_loop_vars: HashSet<(NodeId, usize)> = HashSet::new();
    let push_result = |work: &mut Vec<Origin>, r: RegionId, i: usize| {
        if let Some(o) = g.result(r, i) {
            work.push(o);
        }
    };
    while let Some(o) = work.pop() {
        if !live.insert(o) {
            continue;
        }
        // A loop variable is live through either its output or its argument.
        let loop_var = match o {
            Origin::Out(n, i) if matches!(g.kind(n), NodeKind::Theta) => Some((n, i as usize)),
            Origin::Arg(r, i) if matches!(arg_role(g, r, i as usize), ArgRole::Loop(_)) => Some((g.owner(r).unwrap().0, i as usize)),
            _ => None,
        };
        if let Some((t, l)) = loop_var {
            if live_loop_vars.insert((t, l)) {
                let body = g.subregions(t)[0];
                work.push(Origin::Out(t, l as u32));
                work.push(Origin::Arg(body, l as u32));
                work.push(g.input(t, l));
                push_result(&mut work, body, l + 1);
                push_result(&mut work, body, 0);
            }
            continue;
        }
        match o {
            Origin::Out(n, i) => match g.kind(n) {
                NodeKind::Simple(_) => work.extend(g.inputs(n)),
                NodeKind::Gamma => {
                    work.push(g.input(n, 0));
                    for &r in g.subregions(n) {
                        push_result(&mut work, r, i as usize);
                    }
                }
                NodeKind::Lambda { .. } | NodeKind::Delta { .. } => {
                    let body = g.subregions(n)[0];
                    for j in 0..g.region(body).results.len() {
                        push_result(&mut work, body, j);
                    }
                }
                NodeKind::Phi => push_result(&mut work, g.subregions(n)[0], i as usize),
                NodeKind::Theta => unreachable!(),
            },
            Origin::Arg(r, i) => {
                let Some((n, sub)) = g.owner(r) else { continue };
                match arg_role(g, r, i as usize) {
                    ArgRole::Entry(l) => work.push(g.input(n, l + 1)),
                    ArgRole::Context(l) => work.push(g.input(n, l)),
                    ArgRole::Recursion(l) => push_result(&mut work, g.subregions(n)[sub as usize], l),
                    ArgRole::Param(_) | ArgRole::Root(_) | ArgRole::Loop(_) => {}
                }
            }
        }
    }
    live
}

/// Remove everything that does not contribute to an export; returns the
/// number of nodes removed.
pub fn dne(g: &mut Graph) -> usize {
    let before = g.node_count();
    let live = mark(g);
    let root = g.root();
    sweep(g, root, &live);
    for i in (0..g.region(root).args.len()).rev() {
        if g.users(Origin::Arg(root, i as u32)).is_empty() {
            g.remove_import(i).expect("unused import");
        }
    }
    before - g.node_count()
}

fn is_live(g: &Graph, n: NodeId, live: &HashSet<Origin>) -> bool {
    (0..g.num_outputs(n)).any(|i| live.contains(&Origin::Out(n, i as u32)))
}

fn sweep(g: &mut Graph, r: RegionId, live: &HashSet<Origin>) {
    for n in topo(g, r).into_iter().rev() {
        if !is_live(g, n, live) {
            g.remove_node(n).expect("dead node has only dead users");
            continue;
        }
        match g.kind(n).clone() {
            NodeKind::Simple(_) => {}
            NodeKind::Gamma => {
                for l in (0..g.num_outputs(n)).rev() {
                    if !live.contains(&Origin::Out(n, l as u32)) {
                        g.remove_exit_var(n, l).expect("dead exit variable");
                    }
                }
                for r in g.subregions(n).to_vec() {
                    sweep(g, r, live);
                }
                for l in (0..views::num_entry_vars(g, n)).rev() {
                    if views::entry_var(g, n, l).args.iter().all(|a| !live.contains(a)) {
                        g.remove_entry_var(n, l).expect("dead entry variable");
                    }
                }
            }
            NodeKind::Theta => {
                let body = g.subregions(n)[0];
                let dead: Vec<usize> = (0..views::num_loop_vars(g, n)).filter(|&l| !live.contains(&Origin::Out(n, l as u32))).collect();
                for &l in &dead {
                    g.set_result(body, l + 1, Origin::Arg(body, l as u32)).expect("pass-through result");
                }
                sweep(g, body, live);
                for &l in dead.iter().rev() {
                    g.remove_loop_var(n, l).expect("dead loop variable");
                }
            }
            NodeKind::Lambda { .. } | NodeKind::Delta { .. } | NodeKind::Phi => {
                let body = g.subregions(n)[0];
                let dead_rvs: Vec<usize> = if matches!(g.kind(n), NodeKind::Phi) {
                    (0..views::num_recursion_vars(g, n))
                        .filter(|&l| {
                            let rv = views::recursion_var(g, n, l);
                            !live.contains(&rv.output) && !live.contains(&rv.arg)
                        })
                        .collect()
                } else {
                    Vec::new()
                };
                for &l in &dead_rvs {
                    g.clear_result(body, l);
                }
                sweep(g, body, live);
                for &l in dead_rvs.iter().rev() {
                    g.remove_recursion_var(n, l).expect("dead recursion variable");
                }
                for l in (0..views::num_context_vars(g, n)).rev() {
                    if g.users(Origin::Arg(body, l as u32)).is_empty() {
                        g.remove_context_var(n, l).expect("unused context variable");
                    }
                }
            }
        }
    }
}
