//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export takes source text and returns the rendered output, or a
//! message string on failure. The same functions work natively, which is
//! how the tests exercise them.

use rvsdg::interp::DEFAULT_FUEL;
use rvsdg::opt::{parse_passes, PassConfig, DEFAULT_ORDER};
use rvsdg::report::{self, Via};
use rvsdg::source::parse;
use std::fmt::Write;
use wasm_bindgen::prelude::*;

fn config(passes: &str, unroll_factor: u32) -> Result<PassConfig, String> {
    let text = if passes.trim() == "default" { DEFAULT_ORDER } else { passes };
    let passes = parse_passes(text).map_err(|e| e.to_string())?;
    if unroll_factor == 0 {
        return Err("unroll factor must be at least 1".into());
    }
    Ok(PassConfig { passes, unroll_factor, disabled: Vec::new() })
}

/// The pass order used when the pass field says `default`.
#[wasm_bindgen]
pub fn default_passes() -> String {
    DEFAULT_ORDER.to_string()
}

/// Parse, construct and dump the unoptimized graph.
#[wasm_bindgen]
pub fn construct_dump(src: &str) -> Result<String, String> {
    report::dump(src, &PassConfig::only(vec![])).map_err(|e| e.to_string())
}

/// Optimize the graph and return per-pass node counts, the final graph and
/// the destructed module.
#[wasm_bindgen]
pub fn optimize(src: &str, passes: &str, unroll_factor: u32) -> Result<String, String> {
    let m = parse(src).map_err(|e| e.to_string())?;
    let (g, stats) = report::build(&m, &config(passes, unroll_factor)?).map_err(|e| e.to_string())?;
    let lowered = report::lower(&g).map_err(|e| e.to_string())?;
    let mut out = String::new();
    for s in &stats {
        writeln!(out, "; {s}").unwrap();
    }
    out.push_str(&rvsdg::graph::dump::dump(&g));
    out.push_str("\n; destructed\n");
    out.push_str(&rvsdg::source::print_module(&lowered));
    Ok(out)
}

/// Run `func` on comma-separated `args` through the source interpreter, the
/// optimized graph and its destruction, then check the whole module on
/// random inputs.
#[wasm_bindgen]
pub fn run(src: &str, func: &str, args: &str, passes: &str, unroll_factor: u32) -> Result<String, String> {
    let m = parse(src).map_err(|e| e.to_string())?;
    let cfg = config(passes, unroll_factor)?;
    let values = report::parse_args(&m, func, args).map_err(|e| e.to_string())?;
    let mut out = String::new();
    for (name, via) in [("source", Via::Source), ("rvsdg", Via::Graph), ("destructed", Via::Destructed)] {
        let rendered = match report::run(&m, func, &values, DEFAULT_FUEL, via, &cfg).map_err(|e| e.to_string())? {
            Ok(r) => r.render(),
            Err(t) => format!("trap {t}\n"),
        };
        writeln!(out, "[{name}]").unwrap();
        out.push_str(&rendered);
    }
    match report::roundtrip(&m, &cfg, 100, 0) {
        Ok(r) => writeln!(
            out,
            "[roundtrip] graph agreed={} skipped={}, destructed agreed={} skipped={}",
            r.graph.agreed, r.graph.skipped, r.destructed.agreed, r.destructed.skipped
        )
        .unwrap(),
        Err(e) => writeln!(out, "[roundtrip] {e}").unwrap(),
    }
    Ok(out)
}
