//! Destruction: turning a graph back into a source module.
//!
//! Every root-region argument becomes an external declaration, every λ a
//! function and every δ a global with an initializer, including the members
//! of φ-nodes. A definition is exported when one of the root results refers
//! to it. Bodies are lowered by [`scfr`] and then put back into SSA form by
//! [`construct_ssa`].

pub mod scfr;
pub mod ssa;

pub use scfr::scfr;
pub use ssa::construct_ssa;

use crate::graph::views::{self, trace_origin};
use crate::graph::{Graph, NodeId, NodeKind, Origin};
use crate::source::{Function, Global, Module, Operand};
use crate::types::Type;
use std::collections::HashSet;

/// Symbol name of the definition or import an origin refers to.
fn symbol(g: &Graph, o: Origin) -> String {
    match trace_origin(g, o) {
        Origin::Arg(r, i) if r == g.root() => g.imports[i as usize].name.clone(),
        Origin::Out(n, 0) => match g.kind(n) {
            NodeKind::Lambda { name, .. } | NodeKind::Delta { name, .. } => name.clone(),
            k => panic!("context variable bound to a {} output", k.name()),
        },
        t => panic!("context variable bound to {t}, which is not a definition"),
    }
}

/// λ and δ nodes of the root region and of its φ-nodes, in region order.
fn definitions(g: &Graph) -> Vec<NodeId> {
    fn walk(g: &Graph, n: NodeId, out: &mut Vec<NodeId>) {
        match g.kind(n) {
            NodeKind::Lambda { .. } | NodeKind::Delta { .. } => out.push(n),
            NodeKind::Phi => {
                for m in crate::graph::topo::topo(g, g.subregions(n)[0]) {
                    walk(g, m, out);
                }
            }
            k => panic!("{} in the root region", k.name()),
        }
    }
    let mut out = Vec::new();
    for n in crate::graph::topo::topo(g, g.root()) {
        walk(g, n, &mut out);
    }
    out
}

/// Definitions reachable from a root result.
fn exported(g: &Graph) -> HashSet<NodeId> {
    let root = g.root();
    (0..g.region(root).results.len())
        .filter_map(|i| g.result(root, i))
        .filter_map(|o| match trace_origin(g, o) {
            Origin::Out(n, _) => Some(n),
            _ => None,
        })
        .collect()
}

fn params_of(sig: &crate::types::FnSig) -> Vec<(String, Type)> {
    sig.raise().params.into_iter().enumerate().map(|(i, t)| (format!("p{i}"), t)).collect()
}

/// Rebuild a module from `g` with non-SSA bodies, as produced directly by
/// structured control-flow recovery.
pub fn inter_pcfr(g: &Graph) -> Module {
    let mut m = Module { globals: Vec::new(), functions: Vec::new() };
    for imp in &g.imports {
        match &imp.ty {
            Type::Fn(sig) => m.functions.push(Function {
                name: imp.name.clone(),
                params: params_of(sig),
                ret: sig.raise().results.first().cloned(),
                exported: false,
                body: None,
            }),
            ty => m.globals.push(Global { name: imp.name.clone(), ty: ty.clone(), exported: false, init: None }),
        }
    }
    let exports = exported(g);
    for n in definitions(g) {
        let body = g.subregions(n)[0];
        let cv = views::num_context_vars(g, n);
        let mut env: scfr::Env = (0..cv).map(|l| (Origin::Arg(body, l as u32), Operand::Sym(symbol(g, g.input(n, l))))).collect();
        match g.kind(n) {
            NodeKind::Lambda { name, sig } => {
                let params = params_of(sig);
                for (j, (p, _)) in params.iter().enumerate() {
                    env.insert(Origin::Arg(body, (cv + j) as u32), Operand::Var(p.clone()));
                }
                m.functions.push(Function {
                    name: name.clone(),
                    params,
                    ret: sig.raise().results.first().cloned(),
                    exported: exports.contains(&n),
                    body: Some(scfr(g, n, env)),
                });
            }
            NodeKind::Delta { name, ty } => {
                m.globals.push(Global { name: name.clone(), ty: ty.clone(), exported: exports.contains(&n), init: Some(scfr(g, n, env)) })
            }
            _ => unreachable!(),
        }
    }
    m
}

/// Rebuild a module from `g` with every body in SSA form.
pub fn destruct(g: &Graph) -> Module {
    let mut m = inter_pcfr(g);
    for f in &mut m.functions {
        if let Some(b) = &f.body {
            f.body = Some(construct_ssa(&f.params, b));
        }
    }
    for gl in &mut m.globals {
        if let Some(b) = &gl.init {
            gl.init = Some(construct_ssa(&[], b));
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::construct;
    use crate::interp::{eval_cfg, Value};
    use crate::source::{compute_ipg, parse, validate_module, Mode, Term};

    fn roundtrip(src: &str) -> (Module, Module) {
        let m = parse(src).unwrap();
        let g = construct(&m).unwrap().graph;
        let d = destruct(&g);
        let errs = validate_module(&d, Mode::Ssa);
        assert!(errs.is_empty(), "{errs:?}\n{}", crate::source::print_module(&d));
        (m, d)
    }

    fn fixture(name: &str) -> String {
        std::fs::read_to_string(format!("{}/corpus/{name}.ir", env!("CARGO_MANIFEST_DIR"))).unwrap()
    }

    #[test]
    fn gcd_roundtrip() {
        let (m, d) = roundtrip(&fixture("gcd"));
        for a in 0..10 {
            for b in 0..10 {
                let args = [Value::i64(a), Value::i64(b)];
                let want = eval_cfg(&m, "gcd", &args, 100_000).map(|r| r.result);
                let got = eval_cfg(&d, "gcd", &args, 100_000).map(|r| r.result);
                assert_eq!(want, got, "gcd({a}, {b})");
            }
        }
    }

    #[test]
    fn straight_line_is_one_block() {
        let (_, d) = roundtrip("export define i64 @f(i64 %a, i64 %b) {\n  %x = mul i64 %a, %b\n  %y = sub i64 %x, %a\n  ret %y\n}");
        let f = d.function("f").unwrap();
        assert!(f.exported);
        assert_eq!(f.body.as_ref().unwrap().blocks.len(), 1);
    }

    #[test]
    fn three_way_gamma_is_a_three_way_branch() {
        let (_, d) = roundtrip(
            "export define i64 @f(i64 %a) {
entry:
  %s = copy i64 %a
  branch i64 %s, [%b0, %b1, %b2]
b0:
  %r = copy i64 10
  br label %end
b1:
  %r = copy i64 20
  br label %end
b2:
  %r = copy i64 30
  br label %end
end:
  ret %r
}",
        );
        let cfg = d.function("f").unwrap().body.as_ref().unwrap();
        let branches: Vec<usize> = cfg
            .blocks
            .iter()
            .filter_map(|b| match &b.term {
                Term::Branch(_, _, ts) => Some(ts.len()),
                _ => None,
            })
            .collect();
        assert_eq!(branches, [3]);
        for (a, want) in [(0, 10), (1, 20), (2, 30), (7, 30)] {
            assert_eq!(eval_cfg(&d, "f", &[Value::i64(a)], 1000).unwrap().result, Some(Value::i64(want)));
        }
    }

    #[test]
    fn ipg_survives_the_roundtrip() {
        let src = fixture("indirect_calls");
        let (m, d) = roundtrip(&src);
        let (a, b) = (compute_ipg(&m), compute_ipg(&d));
        assert_eq!(a.names.len(), b.names.len());
        let edges = |ipg: &crate::source::Ipg| {
            let mut e: Vec<(String, String)> = ipg.edges.iter().map(|&(i, j)| (ipg.names[i].clone(), ipg.names[j].clone())).collect();
            e.sort();
            e
        };
        assert_eq!(edges(&a), edges(&b));
    }

    #[test]
    fn only_externals() {
        let mut g = Graph::new();
        g.add_import("print_i64", Type::func(vec![crate::types::I64], vec![]));
        g.add_import("counter", crate::types::I64);
        let d = destruct(&g);
        assert_eq!(d.functions.len(), 1);
        assert!(d.functions[0].is_external());
        assert_eq!(d.globals.len(), 1);
        assert!(d.globals[0].init.is_none());
    }
}
