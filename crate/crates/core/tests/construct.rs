mod common;

use rvsdg::construct::construct;
use rvsdg::graph::validate;
use rvsdg::interp::eval_rvsdg;
use rvsdg::interp::oracle::check_module;

#[test]
fn corpus_constructs_valid_equivalent_graphs() {
    for (name, m) in common::corpus() {
        let c = construct(&m).unwrap_or_else(|e| panic!("{name}: {e}"));
        let v = validate(&c.graph);
        assert!(v.is_empty(), "{name}: {v:?}");
        let tally =
            check_module(&m, 100, 1, &mut |f, args, fuel| eval_rvsdg(&c.graph, f, args, fuel)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(tally.agreed > 0, "{name}: no sample agreed ({tally:?})");
    }
}
