#![allow(dead_code)]

use rvsdg::source::{parse, Module};
use std::path::PathBuf;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

/// Every corpus program, sorted by file name.
pub fn corpus() -> Vec<(String, Module)> {
    let mut files: Vec<PathBuf> =
        std::fs::read_dir(corpus_dir()).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|x| x == "ir")).collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).unwrap();
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let m = parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
            (name, m)
        })
        .collect()
}

pub fn fixture(name: &str) -> Module {
    let text = std::fs::read_to_string(corpus_dir().join(format!("{name}.ir"))).unwrap();
    parse(&text).unwrap()
}
