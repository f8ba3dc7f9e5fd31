//! Regionalized value state dependence graph (RVSDG) middle-end.
//!
//! The crate converts programs in a small CFG-based source IR into an RVSDG,
//! optimizes the graph, turns it back into a CFG, and provides reference
//! interpreters for both forms so every step can be checked for semantic
//! equivalence.

pub mod construct;
pub mod destruct;
pub mod generate;
pub mod graph;
pub mod interp;
pub mod opt;
pub mod report;
pub mod source;
pub mod types;
