mod common;

use rayon::prelude::*;
use rvsdg::construct::construct;
use rvsdg::interp::eval_rvsdg;
use rvsdg::interp::oracle::check_module;
use rvsdg::opt::{run_pipeline, Pass, PassConfig};

fn check(configs: &[(String, PassConfig)], samples: usize) {
    let corpus = common::corpus();
    let jobs: Vec<_> = corpus.iter().flat_map(|m| configs.iter().map(move |c| (m, c))).collect();
    let failures: Vec<String> = jobs
        .par_iter()
        .filter_map(|((name, m), (label, cfg))| {
            let mut g = construct(m).unwrap().graph;
            if let Err(e) = run_pipeline(&mut g, cfg) {
                return Some(format!("{name} [{label}]: {e}"));
            }
            match check_module(m, samples, 7, &mut |f, args, fuel| eval_rvsdg(&g, f, args, fuel)) {
                Ok(t) if t.agreed > 0 => None,
                Ok(t) => Some(format!("{name} [{label}]: nothing agreed ({t:?})")),
                Err(e) => Some(format!("{name} [{label}]: {e}")),
            }
        })
        .collect();
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn each_pass_preserves_behaviour() {
    let configs: Vec<_> = Pass::ALL.iter().map(|&p| (p.to_string(), PassConfig::only(vec![p]))).collect();
    check(&configs, 40);
}

#[test]
fn default_pipeline_preserves_behaviour() {
    check(&[("default".to_string(), PassConfig::default())], 100);
}

#[test]
fn unroll_factors_preserve_behaviour() {
    let configs: Vec<_> = [2, 3, 8]
        .into_iter()
        .map(|f| {
            (format!("URL x{f}"), PassConfig { unroll_factor: f, ..PassConfig::only(vec![Pass::Url, Pass::Red, Pass::Cne, Pass::Dne]) })
        })
        .collect();
    check(&configs, 40);
}
