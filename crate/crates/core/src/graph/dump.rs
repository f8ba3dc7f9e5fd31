//! Line-oriented textual dump, stable across runs for golden comparisons.

use super::topo::topo;
use super::{Graph, NodeId, NodeKind, RegionId};
use std::fmt::Write;

pub fn node_label(g: &Graph, n: NodeId) -> String {
    match g.kind(n) {
        NodeKind::Simple(op) => op.to_string(),
        NodeKind::Lambda { name, .. } => format!("lambda @{name}"),
        NodeKind::Delta { name, ty } => format!("delta @{name} : {ty}"),
        k => k.name(),
    }
}

fn region(g: &Graph, r: RegionId, depth: usize, out: &mut String) {
    let ind = "  ".repeat(depth);
    let reg = g.region(r);
    let args: Vec<String> = reg.args.iter().enumerate().map(|(i, a)| format!("a{i}:{}", a.ty)).collect();
    let _ = writeln!(out, "{ind}region {r} [{}]", args.join(", "));
    for n in topo(g, r) {
        let node = g.node(n);
        let ins: Vec<String> = node.inputs.iter().map(|s| s.origin.map(|o| o.to_string()).unwrap_or_else(|| "?".into())).collect();
        let outs: Vec<String> = node.outputs.iter().map(|p| p.ty.to_string()).collect();
        let _ = write!(out, "{ind}  {n} = {} ({}) -> ({})", node_label(g, n), ins.join(", "), outs.join(", "));
        if node.regions.is_empty() {
            out.push('\n');
        } else {
            out.push_str(" {\n");
            for &s in &node.regions {
                region(g, s, depth + 2, out);
            }
            let _ = writeln!(out, "{ind}  }}");
        }
    }
    let res: Vec<String> = reg.results.iter().map(|s| s.origin.map(|o| o.to_string()).unwrap_or_else(|| "?".into())).collect();
    let _ = writeln!(out, "{ind}results [{}]", res.join(", "));
}

/// Render the whole graph.
pub fn dump(g: &Graph) -> String {
    let mut out = String::new();
    for (i, imp) in g.imports.iter().enumerate() {
        let _ = writeln!(out, "import a{i} @{} : {}", imp.name, imp.ty);
    }
    for (i, e) in g.exports.iter().enumerate() {
        let _ = writeln!(out, "export r{i} @{e}");
    }
    region(g, g.root(), 0, &mut out);
    out
}
