//! Graph optimizations and the pass manager that runs them in order.

pub mod cne;
pub mod dne;
pub mod iln;
pub mod inv;
pub mod ivt;
pub mod pll;
pub mod psh;
pub mod red;
pub mod url;

use crate::graph::{validate, Graph, NodeId, NodeKind, RegionId, Violation};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pass {
    Dne,
    Cne,
    Iln,
    Inv,
    Psh,
    Pll,
    Red,
    Url,
    Ivt,
}

impl Pass {
    pub const ALL: [Pass; 9] = [Pass::Dne, Pass::Cne, Pass::Iln, Pass::Inv, Pass::Psh, Pass::Pll, Pass::Red, Pass::Url, Pass::Ivt];

    pub fn name(self) -> &'static str {
        match self {
            Pass::Dne => "DNE",
            Pass::Cne => "CNE",
            Pass::Iln => "ILN",
            Pass::Inv => "INV",
            Pass::Psh => "PSH",
            Pass::Pll => "PLL",
            Pass::Red => "RED",
            Pass::Url => "URL",
            Pass::Ivt => "IVT",
        }
    }
}

impl fmt::Display for Pass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("unknown pass '{0}' (expected one of DNE CNE ILN INV PSH PLL RED URL IVT)")]
pub struct UnknownPass(pub String);

impl FromStr for Pass {
    type Err = UnknownPass;

    fn from_str(s: &str) -> Result<Pass, UnknownPass> {
        Pass::ALL.into_iter().find(|p| p.name().eq_ignore_ascii_case(s.trim())).ok_or_else(|| UnknownPass(s.to_string()))
    }
}

/// The default pass order.
pub const DEFAULT_ORDER: &str = "ILN INV RED DNE IVT INV DNE PSH INV DNE URL INV RED CNE DNE PLL INV DNE";

pub const DEFAULT_UNROLL_FACTOR: u32 = 4;

/// Parse a pass list separated by commas and/or whitespace.
pub fn parse_passes(s: &str) -> Result<Vec<Pass>, UnknownPass> {
    s.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).map(Pass::from_str).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PassConfig {
    pub passes: Vec<Pass>,
    pub unroll_factor: u32,
    /// Passes listed here are skipped wherever they appear in `passes`.
    pub disabled: Vec<Pass>,
}

impl Default for PassConfig {
    fn default() -> Self {
        PassConfig { passes: parse_passes(DEFAULT_ORDER).unwrap(), unroll_factor: DEFAULT_UNROLL_FACTOR, disabled: Vec::new() }
    }
}

impl PassConfig {
    pub fn only(passes: Vec<Pass>) -> PassConfig {
        PassConfig { passes, ..PassConfig::default() }
    }

    pub fn enabled(&self, p: Pass) -> bool {
        !self.disabled.contains(&p)
    }
}

/// Node count before and after one pass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PassStat {
    pub pass: Pass,
    pub nodes_before: usize,
    pub nodes_after: usize,
}

impl fmt::Display for PassStat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let delta = self.nodes_after as i64 - self.nodes_before as i64;
        write!(f, "pass={} nodes_before={} nodes_after={} delta={delta}", self.pass, self.nodes_before, self.nodes_after)
    }
}

#[derive(Clone, Debug, Error)]
#[error("graph invalid after {pass}: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct PipelineError {
    pub pass: Pass,
    /// Index of the failing pass in the pipeline.
    pub index: usize,
    pub violations: Vec<Violation>,
}

/// Run one pass; returns how many rewrites it made (removed nodes for
/// DNE, diverted origins for CNE, and so on).
pub fn run_pass(g: &mut Graph, pass: Pass, unroll_factor: u32) -> usize {
    match pass {
        Pass::Dne => dne::dne(g),
        Pass::Cne => cne::cne(g),
        Pass::Iln => iln::iln(g),
        Pass::Inv => inv::inv(g),
        Pass::Psh => psh::psh(g),
        Pass::Pll => pll::pll(g),
        Pass::Red => red::red(g),
        Pass::Url => url::url(g, unroll_factor),
        Pass::Ivt => ivt::ivt(g),
    }
}

/// Run the configured passes in order, validating the graph after each.
pub fn run_pipeline(g: &mut Graph, cfg: &PassConfig) -> Result<Vec<PassStat>, PipelineError> {
    let mut stats = Vec::new();
    for (index, &pass) in cfg.passes.iter().enumerate() {
        if !cfg.enabled(pass) {
            continue;
        }
        let before = g.node_count();
        run_pass(g, pass, cfg.unroll_factor);
        let violations = validate(g);
        if !violations.is_empty() {
            return Err(PipelineError { pass, index, violations });
        }
        stats.push(PassStat { pass, nodes_before: before, nodes_after: g.node_count() });
    }
    Ok(stats)
}

/// Every region of the graph, innermost first: each region precedes the
/// region containing its owner.
pub(crate) fn regions_postorder(g: &Graph) -> Vec<RegionId> {
    fn visit(g: &Graph, r: RegionId, out: &mut Vec<RegionId>) {
        for n in g.nodes_in(r) {
            for &s in g.subregions(n) {
                visit(g, s, out);
            }
        }
        out.push(r);
    }
    let mut out = Vec::new();
    visit(g, g.root(), &mut out);
    out
}

/// Structural nodes of the given kind, innermost first.
pub(crate) fn structural_postorder(g: &Graph, pred: impl Fn(&NodeKind) -> bool) -> Vec<NodeId> {
    regions_postorder(g)
        .into_iter()
        .filter_map(|r| g.owner(r).filter(|(_, i)| *i == 0).map(|(n, _)| n))
        .filter(|&n| pred(g.kind(n)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_names_roundtrip() {
        for p in Pass::ALL {
            assert_eq!(p.name().parse::<Pass>().unwrap(), p);
        }
        assert_eq!(parse_passes("CNE,DNE").unwrap(), vec![Pass::Cne, Pass::Dne]);
        assert_eq!(parse_passes("").unwrap(), vec![]);
        assert!(parse_passes("XYZ").is_err());
        assert_eq!(PassConfig::default().passes.len(), 18);
    }
}
