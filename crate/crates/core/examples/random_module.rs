//! Print the generated module for a seed: `cargo run --example random_module -- 42`.

use rvsdg::generate::{random_module, GenConfig};
use rvsdg::source::print_module;

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    print!("{}", print_module(&random_module(seed, &GenConfig::default())));
}
