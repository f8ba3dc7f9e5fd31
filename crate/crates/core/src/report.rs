//! Driver-level operations shared by the command-line tool and the browser
//! demo: statistics, DOT output at three levels, argument parsing and the
//! end-to-end equivalence check.
//!
//! Everything here is deterministic for a fixed input and seed, so outputs
//! can be compared byte for byte.

use crate::construct::structure::{Tree, TreeKind};
use crate::construct::{construct, destruct_ssa, prepare_body, ConstructError, NodeCounts};
use crate::destruct::{construct_ssa, destruct};
use crate::graph::{self, Graph, Origin};
use crate::interp::oracle::{check_module, Mismatch, Tally};
use crate::interp::{eval_cfg, eval_rvsdg, Run, Trap, Value};
use crate::opt::dne::mark;
use crate::opt::{run_pipeline, PassConfig, PassStat, PipelineError};
use crate::source::{parse, print, validate_module, Cfg, InstKind, Mode, Module, ParseError, Term};
use crate::types::Type;
use std::collections::BTreeMap;
use std::fmt::Write;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Usage(String),
    #[error("equivalence failure: {0}")]
    Mismatch(Mismatch),
    #[error("construction failed: {0}")]
    Construct(#[from] ConstructError),
    #[error("{0}")]
    Pipeline(#[from] PipelineError),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    /// Process exit status: 1 for bad input, 2 for an equivalence failure,
    /// 3 for a broken internal invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Usage(_) => 1,
            Error::Mismatch(_) => 2,
            Error::Construct(_) | Error::Pipeline(_) | Error::Invariant(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Construct and validate the graph of `m`, then run the configured passes.
pub fn build(m: &Module, passes: &PassConfig) -> Result<(Graph, Vec<PassStat>)> {
    let mut g = construct(m)?.graph;
    let v = graph::validate(&g);
    if !v.is_empty() {
        let v: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        return Err(Error::Invariant(format!("graph invalid after construction: {}", v.join("; "))));
    }
    let stats = run_pipeline(&mut g, passes)?;
    Ok((g, stats))
}

/// Destruct `g` and check that the result is valid SSA.
pub fn lower(g: &Graph) -> Result<Module> {
    let d = destruct(g);
    let v = validate_module(&d, Mode::Ssa);
    if !v.is_empty() {
        return Err(Error::Invariant(format!("destructed module is not valid SSA: {}", v.join("; "))));
    }
    Ok(d)
}

/// Parse, construct, optimize and render the graph as a textual dump.
pub fn dump(src: &str, passes: &PassConfig) -> Result<String> {
    let (g, _) = build(&parse(src)?, passes)?;
    Ok(graph::dump::dump(&g))
}

/// Full pipeline from source text back to source text.
pub fn roundtrip_text(src: &str, passes: &PassConfig) -> Result<String> {
    let (g, _) = build(&parse(src)?, passes)?;
    Ok(crate::source::print_module(&lower(&g)?))
}

/// Samples checked at each stage of [`roundtrip`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RoundtripReport {
    pub graph: Tally,
    pub destructed: Tally,
}

/// Check that the optimized graph and its destruction both behave like `m`
/// on `samples` random inputs per exported function.
pub fn roundtrip(m: &Module, passes: &PassConfig, samples: usize, seed: u64) -> Result<RoundtripReport> {
    let (g, _) = build(m, passes)?;
    let graph = check_module(m, samples, seed, &mut |f, a, fuel| eval_rvsdg(&g, f, a, fuel)).map_err(Error::Mismatch)?;
    let d = lower(&g)?;
    if d.functions.iter().filter_map(|f| f.body.as_ref()).any(|b| b.reachable().contains(&false)) {
        return Err(Error::Invariant("destructed module has unreachable blocks".into()));
    }
    let destructed = check_module(m, samples, seed, &mut |f, a, fuel| eval_cfg(&d, f, a, fuel)).map_err(Error::Mismatch)?;
    Ok(RoundtripReport { graph, destructed })
}

/// Which evaluator [`run`] uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Via {
    Source,
    Graph,
    Destructed,
}

impl FromStr for Via {
    type Err = Error;

    fn from_str(s: &str) -> Result<Via> {
        match s {
            "source" => Ok(Via::Source),
            "rvsdg" | "graph" => Ok(Via::Graph),
            "destructed" | "roundtrip" => Ok(Via::Destructed),
            _ => Err(Error::Usage(format!("unknown evaluator '{s}' (expected source, rvsdg or destructed)"))),
        }
    }
}

/// Parse a comma-separated argument list against a function's parameters.
pub fn parse_args(m: &Module, func: &str, text: &str) -> Result<Vec<Value>> {
    let f = m.function(func).ok_or_else(|| Error::Usage(format!("no function @{func}")))?;
    let parts: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if parts.len() != f.params.len() {
        return Err(Error::Usage(format!("@{func} takes {} arguments, got {}", f.params.len(), parts.len())));
    }
    parts
        .iter()
        .zip(&f.params)
        .map(|(s, (_, ty))| match ty {
            Type::Int(w) => s.parse::<i64>().map(|v| Value::int(*w, v)).map_err(|e| Error::Usage(format!("'{s}': {e}"))),
            Type::F64 => s.parse::<f64>().map(Value::F64).map_err(|e| Error::Usage(format!("'{s}': {e}"))),
            t => Err(Error::Usage(format!("cannot pass a {t} argument from the command line"))),
        })
        .collect()
}

/// Evaluate one function. Traps are part of the outcome, not errors.
pub fn run(m: &Module, func: &str, args: &[Value], fuel: u64, via: Via, passes: &PassConfig) -> Result<std::result::Result<Run, Trap>> {
    Ok(match via {
        Via::Source => eval_cfg(m, func, args, fuel),
        Via::Graph => eval_rvsdg(&build(m, passes)?.0, func, args, fuel),
        Via::Destructed => eval_cfg(&lower(&build(m, passes)?.0)?, func, args, fuel),
    })
}

/// Instruction count of `m` in SSA form without copies: phis, operations
/// and terminators. Assignments between variables disappear in SSA form,
/// so this is the size the module would have as SSA input to construction.
pub fn ssa_instruction_count(m: &Module) -> usize {
    let count = |params: &[(String, Type)], body: &Cfg| {
        let body = if body.has_phis() { destruct_ssa(body) } else { body.clone() };
        construct_ssa(params, &body)
            .blocks
            .iter()
            .map(|b| b.phis.len() + 1 + b.insts.iter().filter(|i| !matches!(i.kind, InstKind::Copy(..))).count())
            .sum::<usize>()
    };
    let f: usize = m.functions.iter().filter_map(|f| f.body.as_ref().map(|b| count(&f.params, b))).sum();
    let g: usize = m.globals.iter().filter_map(|g| g.init.as_ref().map(|b| count(&[], b))).sum();
    f + g
}

/// Number of simple nodes per operation name.
pub fn op_counts(g: &Graph) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for n in g.node_ids() {
        if let Some(op) = g.op(n) {
            *out.entry(op.name()).or_insert(0) += 1;
        }
    }
    out
}

/// Deepest region nesting; the root region has depth 0.
pub fn region_tree_depth(g: &Graph) -> usize {
    g.region_ids().map(|r| g.region_depth(r)).max().unwrap_or(0)
}

/// Live origins and dead nodes according to the DNE mark phase.
pub fn liveness(g: &Graph) -> (usize, usize) {
    let live = mark(g);
    let dead = g.node_ids().filter(|&n| (0..g.num_outputs(n)).all(|i| !live.contains(&Origin::Out(n, i as u32)))).count();
    (live.len(), dead)
}

/// `key=value` statistics: source size, per-definition construction
/// figures, per-pass node deltas and the final graph's shape.
pub fn stats(m: &Module, passes: &PassConfig) -> Result<String> {
    let c = construct(m)?;
    let mut g = c.graph;
    let per_pass = run_pipeline(&mut g, passes)?;
    let mut s = String::new();
    let blocks: usize = m.functions.iter().filter_map(|f| f.body.as_ref()).map(|b| b.blocks.len()).sum();
    let _ = writeln!(s, "instructions={}", m.instruction_count());
    let _ = writeln!(s, "instructions.ssa={}", ssa_instruction_count(m));
    let _ = writeln!(s, "blocks={blocks}");
    for f in &c.functions {
        let _ = writeln!(s, "{f}");
    }
    for p in &per_pass {
        let _ = writeln!(s, "{p}");
    }
    let counts = NodeCounts::of(&g);
    for (k, v) in [
        ("nodes", counts.total()),
        ("nodes.simple", counts.simple),
        ("nodes.gamma", counts.gamma),
        ("nodes.theta", counts.theta),
        ("nodes.lambda", counts.lambda),
        ("nodes.delta", counts.delta),
        ("nodes.phi", counts.phi),
        ("region_depth", region_tree_depth(&g)),
    ] {
        let _ = writeln!(s, "{k}={v}");
    }
    for (op, n) in op_counts(&g) {
        let _ = writeln!(s, "op.{op}={n}");
    }
    let (live, dead) = liveness(&g);
    let _ = writeln!(s, "dne.live_origins={live}");
    let _ = writeln!(s, "dne.dead_nodes={dead}");
    Ok(s)
}

/// Output level of [`dot`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    Rvsdg,
    Cfg,
    Tree,
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Level> {
        match s {
            "rvsdg" => Ok(Level::Rvsdg),
            "cfg" => Ok(Level::Cfg),
            "tree" => Ok(Level::Tree),
            _ => Err(Error::Usage(format!("unknown level '{s}' (expected rvsdg, cfg or tree)"))),
        }
    }
}

/// DOT rendering of the optimized graph, the source CFGs or the annotated
/// control trees of the restructured CFGs.
pub fn dot(m: &Module, level: Level, passes: &PassConfig) -> Result<String> {
    match level {
        Level::Rvsdg => Ok(graph::dot::to_dot(&build(m, passes)?.0)),
        Level::Cfg => Ok(cfg_dot(m)),
        Level::Tree => tree_dot(m),
    }
}

fn esc(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Bodies of a module: function bodies, then global initializers.
fn bodies(m: &Module) -> Vec<(&str, Option<&Type>, &Cfg, bool)> {
    let fs = m.functions.iter().filter_map(|f| f.body.as_ref().map(|b| (f.name.as_str(), f.ret.as_ref(), b, false)));
    let gs = m.globals.iter().filter_map(|g| g.init.as_ref().map(|b| (g.name.as_str(), Some(&g.ty), b, true)));
    fs.chain(gs).collect()
}

/// One cluster per body, one record-like box per basic block.
pub fn cfg_dot(m: &Module) -> String {
    let mut out = String::from("digraph cfg {\nnode [shape=box,fontname=monospace];\n");
    for (k, (name, _, cfg, _)) in bodies(m).into_iter().enumerate() {
        let _ = writeln!(out, "subgraph cluster_{k} {{\nlabel=\"@{}\";", esc(name));
        for (i, b) in cfg.blocks.iter().enumerate() {
            let mut label = format!("{}:\\l", esc(&b.label));
            for inst in &b.insts {
                label.push_str(&esc(&print::inst(inst)));
                label.push_str("\\l");
            }
            label.push_str(&esc(&print::term(&b.term)));
            label.push_str("\\l");
            let _ = writeln!(out, "f{k}_b{i} [label=\"{label}\"];");
        }
        for (i, b) in cfg.blocks.iter().enumerate() {
            let ts = b.term.targets();
            for (j, t) in ts.iter().enumerate() {
                let to = cfg.index_of(t).expect("validated target");
                let lbl = if matches!(b.term, Term::Branch(..)) { format!(" [label=\"{j}\"]") } else { String::new() };
                let _ = writeln!(out, "f{k}_b{i} -> f{k}_b{to}{lbl};");
            }
        }
        out.push_str("}\n");
    }
    out.push_str("}\n");
    out
}

/// Control trees of the restructured bodies with read, write and demand
/// sets on every node.
pub fn tree_dot(m: &Module) -> Result<String> {
    let mut out = String::from("digraph tree {\nnode [shape=box,fontname=monospace];\n");
    for (k, (name, ret, cfg, stateless)) in bodies(m).into_iter().enumerate() {
        let (r, tree, _) = prepare_body(name, ret, cfg, stateless)?;
        let _ = writeln!(out, "subgraph cluster_{k} {{\nlabel=\"@{}\";", esc(name));
        let mut next = 0;
        tree_nodes(&tree, &r, k, &mut next, None, &mut out);
        out.push_str("}\n");
    }
    out.push_str("}\n");
    Ok(out)
}

fn tree_nodes(t: &Tree, cfg: &Cfg, k: usize, next: &mut usize, parent: Option<usize>, out: &mut String) {
    let id = *next;
    *next += 1;
    let set = |s: &std::collections::BTreeSet<String>| s.iter().map(String::as_str).collect::<Vec<_>>().join(" ");
    let head = match t.kind {
        TreeKind::Block(b) => cfg.blocks[b].label.clone(),
        TreeKind::Linear => "linear".into(),
        TreeKind::Branch => "branch".into(),
        TreeKind::Loop => "loop".into(),
    };
    let label = format!("{head}\\nR={{{}}}\\nW={{{}}}\\nD={{{}}}", esc(&set(&t.reads)), esc(&set(&t.writes)), esc(&set(&t.demand)));
    let _ = writeln!(out, "f{k}_t{id} [label=\"{label}\"];");
    if let Some(p) = parent {
        let _ = writeln!(out, "f{k}_t{p} -> f{k}_t{id};");
    }
    for c in &t.children {
        tree_nodes(c, cfg, k, next, Some(id), out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str = "export define i64 @f(i64 %a, i64 %b) {
entry:
  %x = mul i64 %a, %b
  %y = mul i64 %a, %b
  %c = lt i64 %a, %b
  branch i1 %c, [%l, %r]
l:
  %z = add i64 %x, %y
  br label %end
r:
  %z = copy i64 %x
  br label %end
end:
  ret %z
}";

    #[test]
    fn stats_report_ops_and_deltas() {
        let m = parse(SRC).unwrap();
        let none = stats(&m, &PassConfig::only(vec![])).unwrap();
        assert!(none.contains("op.mul=2\n"), "{none}");
        assert!(none.contains("nodes.gamma=1\n"), "{none}");
        assert!(none.contains("region_depth=2\n"), "{none}");
        let cne = stats(&m, &PassConfig::only(crate::opt::parse_passes("CNE,DNE").unwrap())).unwrap();
        assert!(cne.contains("op.mul=1\n"), "{cne}");
        assert!(cne.contains("pass=CNE "), "{cne}");
        assert!(cne.contains("dne.dead_nodes=0\n"), "{cne}");
    }

    #[test]
    fn dot_levels_are_well_formed() {
        let m = parse(SRC).unwrap();
        for level in [Level::Rvsdg, Level::Cfg, Level::Tree] {
            let d = dot(&m, level, &PassConfig::default()).unwrap();
            assert!(d.starts_with("digraph"));
            assert_eq!(d.matches('{').count(), d.matches('}').count(), "{d}");
        }
        let t = tree_dot(&m).unwrap();
        assert!(t.contains("branch\\nR="), "{t}");
    }

    #[test]
    fn args_follow_parameter_types() {
        let m = parse(SRC).unwrap();
        assert_eq!(parse_args(&m, "f", "3, -4").unwrap(), vec![Value::i64(3), Value::i64(-4)]);
        assert_eq!(parse_args(&m, "f", "3").unwrap_err().exit_code(), 1);
        assert!(parse_args(&m, "g", "").is_err());
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        let mismatch = Mismatch { function: "f".into(), args: vec![], detail: "differs".into() };
        assert_eq!(Error::Mismatch(mismatch).exit_code(), 2);
        assert_eq!(Error::Invariant("x".into()).exit_code(), 3);
        assert_eq!(Error::Usage("x".into()).exit_code(), 1);
    }

    #[test]
    fn roundtrip_checks_both_stages() {
        let m = parse(SRC).unwrap();
        let r = roundtrip(&m, &PassConfig::default(), 20, 0).unwrap();
        assert_eq!(r.graph.agreed, 20);
        assert_eq!(r.destructed.agreed, 20);
    }
}
