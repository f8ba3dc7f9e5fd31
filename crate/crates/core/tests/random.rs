//! Construction, every pass and destruction on generated programs.

use rayon::prelude::*;
use rvsdg::construct::construct;
use rvsdg::destruct::destruct;
use rvsdg::generate::{random_corpus, GenConfig};
use rvsdg::interp::oracle::check_module;
use rvsdg::interp::{eval_cfg, eval_rvsdg};
use rvsdg::opt::{run_pipeline, Pass, PassConfig};
use rvsdg::source::print_module;

const SEED: u64 = 0x5eed;

fn failures(count: usize, run: impl Fn(&rvsdg::source::Module) -> Result<(), String> + Sync) -> Vec<String> {
    random_corpus(SEED, count, &GenConfig::default())
        .par_iter()
        .enumerate()
        .filter_map(|(i, m)| run(m).err().map(|e| format!("module {i}: {e}\n{}", print_module(m))))
        .collect()
}

#[test]
fn constructed_graphs_agree_with_source() {
    let bad = failures(500, |m| {
        let g = construct(m).map_err(|e| e.to_string())?.graph;
        check_module(m, 20, 3, &mut |f, a, fuel| eval_rvsdg(&g, f, a, fuel)).map(|_| ()).map_err(|e| e.to_string())
    });
    assert!(bad.is_empty(), "{}", bad[0]);
}

#[test]
fn passes_preserve_behaviour() {
    let mut configs: Vec<PassConfig> = Pass::ALL.iter().map(|&p| PassConfig::only(vec![p])).collect();
    configs.push(PassConfig::default());
    let bad = failures(300, |m| {
        for cfg in &configs {
            let mut g = construct(m).map_err(|e| e.to_string())?.graph;
            run_pipeline(&mut g, cfg).map_err(|e| e.to_string())?;
            check_module(m, 10, 5, &mut |f, a, fuel| eval_rvsdg(&g, f, a, fuel)).map_err(|e| format!("{:?}: {e}", cfg.passes))?;
        }
        Ok(())
    });
    assert!(bad.is_empty(), "{} failures, first: {}", bad.len(), bad[0]);
}

#[test]
fn optimized_roundtrip() {
    let bad = failures(300, |m| {
        let mut g = construct(m).map_err(|e| e.to_string())?.graph;
        run_pipeline(&mut g, &PassConfig::default()).map_err(|e| e.to_string())?;
        let d = destruct(&g);
        check_module(m, 10, 9, &mut |f, a, fuel| eval_cfg(&d, f, a, fuel)).map(|_| ()).map_err(|e| format!("{e}\n{}", print_module(&d)))
    });
    assert!(bad.is_empty(), "{} failures, first: {}", bad.len(), bad[0]);
}
