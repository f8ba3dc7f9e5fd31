use rvsdg::construct::{construct, NodeCounts};
use rvsdg::opt::{run_pipeline, PassConfig};

fn main() {
    for path in std::env::args().skip(1) {
        let m = rvsdg::source::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let mut g = construct(&m).unwrap().graph;
        println!("{path}: {}", NodeCounts::of(&g));
        for s in run_pipeline(&mut g, &PassConfig::default()).unwrap() {
            println!("  {s}");
        }
        println!("  final {}", NodeCounts::of(&g));
    }
}
