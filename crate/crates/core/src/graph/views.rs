//! Variable views: computed pairings between structural-node ports and the
//! ports of their subregions. Nothing here is stored; every view is derived
//! from index arithmetic on the underlying ports.

use super::{Graph, NodeId, NodeKind, Origin, RegionId, User};

/// `ev_l`: input `l+1` of a γ-node and argument `l` of every subregion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntryVar {
    pub input: User,
    pub origin: Origin,
    pub args: Vec<Origin>,
}

/// `ex_l`: result `l` of every subregion and output `l` of a γ-node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExitVar {
    pub results: Vec<Option<Origin>>,
    pub output: Origin,
}

/// `lv_l`: input `l`, argument `l`, result `l+1` and output `l` of a θ-node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopVar {
    pub input: Origin,
    pub arg: Origin,
    pub result: Option<Origin>,
    pub output: Origin,
}

/// `cv_l`: input `l` and argument `l` of a λ/δ/φ node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContextVar {
    pub input: Origin,
    pub arg: Origin,
}

/// `rv_l`: result `l`, argument `l+|CV|` and output `l` of a φ-node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecursionVar {
    pub result: Option<Origin>,
    pub arg: Origin,
    pub output: Origin,
}

pub fn num_entry_vars(g: &Graph, n: NodeId) -> usize {
    g.num_inputs(n) - 1
}

pub fn entry_var(g: &Graph, n: NodeId, l: usize) -> EntryVar {
    EntryVar {
        input: User::In(n, l as u32 + 1),
        origin: g.input(n, l + 1),
        args: g.subregions(n).iter().map(|&r| Origin::Arg(r, l as u32)).collect(),
    }
}

pub fn exit_var(g: &Graph, n: NodeId, l: usize) -> ExitVar {
    ExitVar { results: g.subregions(n).iter().map(|&r| g.result(r, l)).collect(), output: Origin::Out(n, l as u32) }
}

pub fn num_loop_vars(g: &Graph, n: NodeId) -> usize {
    g.num_inputs(n)
}

pub fn loop_var(g: &Graph, n: NodeId, l: usize) -> LoopVar {
    let body = g.subregions(n)[0];
    LoopVar { input: g.input(n, l), arg: Origin::Arg(body, l as u32), result: g.result(body, l + 1), output: Origin::Out(n, l as u32) }
}

/// Origin of a θ-node's continuation predicate.
pub fn theta_predicate(g: &Graph, n: NodeId) -> Option<Origin> {
    g.result(g.subregions(n)[0], 0)
}

pub fn num_context_vars(g: &Graph, n: NodeId) -> usize {
    g.num_inputs(n)
}

pub fn context_var(g: &Graph, n: NodeId, l: usize) -> ContextVar {
    ContextVar { input: g.input(n, l), arg: Origin::Arg(g.subregions(n)[0], l as u32) }
}

pub fn num_recursion_vars(g: &Graph, n: NodeId) -> usize {
    g.num_outputs(n)
}

pub fn recursion_var(g: &Graph, n: NodeId, l: usize) -> RecursionVar {
    let body = g.subregions(n)[0];
    let cv = num_context_vars(g, n);
    RecursionVar { result: g.result(body, l), arg: Origin::Arg(body, (l + cv) as u32), output: Origin::Out(n, l as u32) }
}

/// Which variable an argument of region `r` belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArgRole {
    Root(usize),
    Entry(usize),
    Loop(usize),
    Context(usize),
    Recursion(usize),
    Param(usize),
}

pub fn arg_role(g: &Graph, r: RegionId, i: usize) -> ArgRole {
    let Some((n, _)) = g.owner(r) else { return ArgRole::Root(i) };
    match g.kind(n) {
        NodeKind::Gamma => ArgRole::Entry(i),
        NodeKind::Theta => ArgRole::Loop(i),
        NodeKind::Phi => {
            let cv = num_context_vars(g, n);
            if i < cv {
                ArgRole::Context(i)
            } else {
                ArgRole::Recursion(i - cv)
            }
        }
        NodeKind::Lambda { .. } | NodeKind::Delta { .. } => {
            let cv = num_context_vars(g, n);
            if i < cv {
                ArgRole::Context(i)
            } else {
                ArgRole::Param(i - cv)
            }
        }
        NodeKind::Simple(_) => unreachable!("simple nodes own no regions"),
    }
}

/// Follow `o` through context variables, recursion variables, entry
/// variables and invariant loop variables towards its defining port.
pub fn trace_origin(g: &Graph, mut o: Origin) -> Origin {
    for _ in 0..10_000 {
        let next = match o {
            Origin::Arg(r, i) => {
                let Some((n, sub)) = g.owner(r) else { return o };
                match arg_role(g, r, i as usize) {
                    ArgRole::Entry(l) => Some(g.input(n, l + 1)),
                    ArgRole::Context(l) => Some(g.input(n, l)),
                    ArgRole::Recursion(l) => g.result(g.subregions(n)[sub as usize], l),
                    ArgRole::Loop(l) => {
                        let lv = loop_var(g, n, l);
                        (lv.result == Some(lv.arg)).then_some(lv.input)
                    }
                    _ => None,
                }
            }
            Origin::Out(n, i) => match g.kind(n) {
                NodeKind::Phi => g.result(g.subregions(n)[0], i as usize),
                NodeKind::Theta => {
                    let lv = loop_var(g, n, i as usize);
                    (lv.result == Some(lv.arg)).then_some(lv.input)
                }
                _ => None,
            },
        };
        match next {
            Some(p) => o = p,
            None => return o,
        }
    }
    o
}

/// The λ-node a function-typed origin statically refers to, if any.
pub fn callee_lambda(g: &Graph, o: Origin) -> Option<NodeId> {
    match trace_origin(g, o) {
        Origin::Out(n, 0) if matches!(g.kind(n), NodeKind::Lambda { .. }) => Some(n),
        _ => None,
    }
}

/// Apply nodes whose function input statically refers to `lambda`.
pub fn callers(g: &Graph, lambda: NodeId) -> Vec<NodeId> {
    g.node_ids()
        .filter(|&n| matches!(g.op(n), Some(super::Op::Apply(_))))
        .filter(|&n| callee_lambda(g, g.input(n, 0)) == Some(lambda))
        .collect()
}

/// Nearest enclosing λ/δ node of region `r`.
pub fn enclosing_function(g: &Graph, r: RegionId) -> Option<NodeId> {
    let mut r = r;
    while let Some((n, _)) = g.owner(r) {
        if matches!(g.kind(n), NodeKind::Lambda { .. } | NodeKind::Delta { .. }) {
            return Some(n);
        }
        r = g.parent(n);
    }
    None
}
