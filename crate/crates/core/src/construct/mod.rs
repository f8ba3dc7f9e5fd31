//! Construction of graphs from source modules.
//!
//! Each body goes through SSA destruction, normalization, control-flow
//! restructuring, structural analysis and demand annotation before its
//! control tree is translated into a λ or δ region. Definitions are
//! assembled in callee-first order of the inter-procedure graph's strongly
//! connected components.

pub mod cfr;
pub mod demand;
pub mod inter;
pub mod ssa;
pub mod structure;
pub mod translate;

use crate::graph::{Graph, NodeKind};
use crate::source::{Cfg, Module};
use crate::types::Type;
use std::fmt;
use structure::Tree;
use thiserror::Error;

pub use cfr::restructure;
pub use demand::annotate;
pub use inter::inter_procedural;
pub use ssa::destruct_ssa;
pub use structure::structural_analysis;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ConstructError {
    #[error("{0}")]
    Unstructured(String),
    #[error("@{func}: demanded variable %{var} has no definition")]
    Missing { func: String, var: String },
    #[error("@{func}: {msg}")]
    Graph { func: String, msg: String },
}

impl From<structure::Unstructured> for ConstructError {
    fn from(e: structure::Unstructured) -> Self {
        ConstructError::Unstructured(e.0)
    }
}

/// Per-definition construction statistics.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FunctionStats {
    pub name: String,
    pub blocks: usize,
    pub restructured_blocks: usize,
    pub inserted_blocks: usize,
    pub predicates: usize,
    pub nodes: usize,
}

impl fmt::Display for FunctionStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "function={} blocks={} restructured_blocks={} inserted_blocks={} predicates={} nodes={}",
            self.name, self.blocks, self.restructured_blocks, self.inserted_blocks, self.predicates, self.nodes
        )
    }
}

/// Node counts of a graph by kind.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NodeCounts {
    pub simple: usize,
    pub gamma: usize,
    pub theta: usize,
    pub lambda: usize,
    pub delta: usize,
    pub phi: usize,
}

impl NodeCounts {
    pub fn of(g: &Graph) -> NodeCounts {
        let mut c = NodeCounts::default();
        for n in g.node_ids() {
            match g.kind(n) {
                NodeKind::Simple(_) => c.simple += 1,
                NodeKind::Gamma => c.gamma += 1,
                NodeKind::Theta => c.theta += 1,
                NodeKind::Lambda { .. } => c.lambda += 1,
                NodeKind::Delta { .. } => c.delta += 1,
                NodeKind::Phi => c.phi += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.simple + self.gamma + self.theta + self.lambda + self.delta + self.phi
    }
}

impl fmt::Display for NodeCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "nodes={} simple={} gamma={} theta={} lambda={} delta={} phi={}",
            self.total(),
            self.simple,
            self.gamma,
            self.theta,
            self.lambda,
            self.delta,
            self.phi
        )
    }
}

/// Result of constructing a module.
#[derive(Clone, Debug)]
pub struct Construction {
    pub graph: Graph,
    pub functions: Vec<FunctionStats>,
}

impl Construction {
    /// Line-oriented `key=value` statistics.
    pub fn stats_text(&self) -> String {
        let mut s = String::new();
        for f in &self.functions {
            s.push_str(&f.to_string());
            s.push('\n');
        }
        s.push_str(&format!("total {}\n", NodeCounts::of(&self.graph)));
        s
    }
}

/// Run the intra-procedural pipeline up to demand annotation.
pub fn prepare_body(name: &str, ret: Option<&Type>, cfg: &Cfg, stateless: bool) -> Result<(Cfg, Tree, FunctionStats), ConstructError> {
    let d = destruct_ssa(cfg);
    let n = ssa::normalize(ret, &d);
    let (r, cs) = restructure(&n);
    let mut tree = structural_analysis(&r)?;
    annotate(&mut tree, &r, stateless);
    let st = FunctionStats {
        name: name.to_string(),
        blocks: cfg.blocks.len(),
        restructured_blocks: r.blocks.len(),
        inserted_blocks: cs.blocks,
        predicates: cs.predicates,
        nodes: 0,
    };
    Ok((r, tree, st))
}

/// Construct the graph of a valid module.
pub fn construct(m: &Module) -> Result<Construction, ConstructError> {
    let (graph, functions) = inter_procedural(m)?;
    Ok(Construction { graph, functions })
}
