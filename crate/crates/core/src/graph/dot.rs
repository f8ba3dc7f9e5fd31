//! Graphviz output: one cluster per region, dataflow edges between ports.

use super::topo::topo;
use super::{Graph, NodeKind, Origin, RegionId, User};
use std::fmt::Write;

fn origin_id(o: Origin) -> String {
    match o {
        Origin::Arg(r, i) => format!("r{}_a{i}", r.0),
        Origin::Out(n, _) => format!("n{}", n.0),
    }
}

fn user_id(u: User) -> String {
    match u {
        User::In(n, _) => format!("n{}", n.0),
        User::Res(r, i) => format!("r{}_r{i}", r.0),
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn region(g: &Graph, r: RegionId, out: &mut String, edges: &mut Vec<String>) {
    let reg = g.region(r);
    let _ = writeln!(out, "subgraph cluster_r{} {{", r.0);
    let _ = writeln!(out, "label=\"r{}\";", r.0);
    for (i, a) in reg.args.iter().enumerate() {
        let _ = writeln!(out, "r{}_a{i} [shape=invtriangle,label=\"a{i}:{}\"];", r.0, escape(&a.ty.to_string()));
    }
    for n in topo(g, r) {
        let node = g.node(n);
        let label = format!("n{}:{}", n.0, node.kind.name());
        if node.regions.is_empty() {
            let _ = writeln!(out, "n{} [shape=box,label=\"{}\"];", n.0, escape(&label));
        } else {
            let _ = writeln!(out, "n{} [shape=box,style=bold,label=\"{}\"];", n.0, escape(&label));
            let _ = writeln!(out, "subgraph cluster_n{} {{", n.0);
            let extra = match &node.kind {
                NodeKind::Lambda { name, .. } | NodeKind::Delta { name, .. } => format!(" @{name}"),
                _ => String::new(),
            };
            let _ = writeln!(out, "label=\"{}{}\";", escape(&label), escape(&extra));
            for &s in &node.regions {
                region(g, s, out, edges);
            }
            let _ = writeln!(out, "}}");
        }
        for (i, s) in node.inputs.iter().enumerate() {
            if let Some(o) = s.origin {
                let style = if s.ty.is_state() { ",style=dashed" } else { "" };
                edges.push(format!("{} -> {} [label=\"{i}\"{style}];", origin_id(o), user_id(User::In(n, i as u32))));
            }
        }
    }
    for (i, s) in reg.results.iter().enumerate() {
        let _ = writeln!(out, "r{}_r{i} [shape=triangle,label=\"r{i}:{}\"];", r.0, escape(&s.ty.to_string()));
        if let Some(o) = s.origin {
            let style = if s.ty.is_state() { " [style=dashed]" } else { "" };
            edges.push(format!("{} -> {}{style};", origin_id(o), user_id(User::Res(r, i as u32))));
        }
    }
    let _ = writeln!(out, "}}");
}

/// Render the region tree and dataflow edges in DOT syntax.
pub fn to_dot(g: &Graph) -> String {
    let mut out = String::from("digraph rvsdg {\ncompound=true;\nnode [fontname=monospace];\n");
    let mut edges = Vec::new();
    region(g, g.root(), &mut out, &mut edges);
    for e in edges {
        out.push_str(&e);
        out.push('\n');
    }
    out.push_str("}\n");
    out
}
