//! Loop unrolling.
//!
//! Innermost θ bodies (no nested θ) are replicated `factor` times. Replica
//! `j+1` runs inside the continue alternative of a γ on replica `j`'s
//! predicate, while the exit alternative passes the predicate and values
//! through. Any trip count is handled without a remainder loop.

use super::structural_postorder;
use crate::graph::{Graph, NodeId, NodeKind, Origin, RegionId};

/// Unroll innermost loops by `factor`; returns the number of loops unrolled.
pub fn url(g: &mut Graph, factor: u32) -> usize {
    if factor <= 1 {
        return 0;
    }
    let mut count = 0;
    for t in structural_postorder(g, |k| matches!(k, NodeKind::Theta)) {
        let body = g.subregions(t)[0];
        let innermost = g.nodes_deep(body).into_iter().all(|n| !matches!(g.kind(n), NodeKind::Theta));
        if innermost {
            unroll(g, t, factor);
            count += 1;
        }
    }
    count
}

fn unroll(g: &mut Graph, t: NodeId, factor: u32) {
    let parent = g.parent(t);
    let body = g.subregions(t)[0];
    // A detached copy serves as the template for every replica.
    let template = g.copy_node(t, parent, &g.inputs(t)).expect("template copy");
    let tbody = g.subregions(template)[0];
    let n = g.region(body).results.len();
    let res: Vec<Origin> = (0..n).map(|i| g.result(body, i).expect("complete theta")).collect();
    let out = chain(g, body, res[0], &res[1..], tbody, factor - 1);
    for (i, o) in out.into_iter().enumerate() {
        g.set_result(body, i, o).expect("same type");
    }
    g.remove_node(template).expect("template unused");
}

/// In region `r`, given one replica's predicate `p` and values `vs`, append
/// `remaining` guarded replicas; returns the final predicate and values.
fn chain(g: &mut Graph, r: RegionId, p: Origin, vs: &[Origin], tbody: RegionId, remaining: u32) -> Vec<Origin> {
    let mut all = vec![p];
    all.extend_from_slice(vs);
    if remaining == 0 {
        return all;
    }
    let gm = g.add_gamma(r, p, 2).expect("guard");
    for &o in &all {
        g.add_entry_var(gm, o).expect("entry variable");
    }
    let (exit, cont) = (g.subregions(gm)[0], g.subregions(gm)[1]);
    let args: Vec<Origin> = (1..all.len()).map(|i| Origin::Arg(cont, i as u32)).collect();
    let next = g.copy_region_into(tbody, cont, &args).expect("replica");
    let next: Vec<Origin> = next.into_iter().map(|o| o.expect("complete theta")).collect();
    let inner = chain(g, cont, next[0], &next[1..], tbody, remaining - 1);
    for (i, o) in inner.into_iter().enumerate() {
        g.add_exit_var(gm, &[Origin::Arg(exit, i as u32), o]).expect("exit variable");
    }
    (0..all.len()).map(|i| Origin::Out(gm, i as u32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::construct;
    use crate::graph::{dump::dump, validate};
    use crate::interp::{eval_rvsdg, Value};
    use crate::source::parse;

    const COUNTED: &str = "external @print_i64 : fn(i64) -> void
export define i64 @f(i64 %n) {
entry:
  %p = alloca i64, 1
  store i64 0, %p
  %s = copy i64 0
  %i = copy i64 0
  br label %loop
loop:
  %s = add i64 %s, %i
  store i64 %s, %p
  call void @print_i64(i64 %i)
  %i = add i64 %i, 1
  %c = lt i64 %i, %n
  branch i1 %c, [%out, %loop]
out:
  %v = load i64 %p
  %r = mul i64 %v, %s
  ret %r
}";

    #[test]
    fn any_trip_count_any_factor() {
        let base = construct(&parse(COUNTED).unwrap()).unwrap().graph;
        for factor in [1, 2, 3, 4] {
            let mut g = base.clone();
            url(&mut g, factor);
            assert!(validate(&g).is_empty(), "{:?}", validate(&g));
            for n in 0..=17 {
                let args = [Value::i64(n)];
                let want = eval_rvsdg(&base, "f", &args, 100_000).unwrap();
                let got = eval_rvsdg(&g, "f", &args, 100_000).unwrap();
                assert_eq!(got, want, "factor {factor}, n {n}");
            }
        }
    }

    #[test]
    fn factor_one_is_identity() {
        let mut g = construct(&parse(COUNTED).unwrap()).unwrap().graph;
        let before = dump(&g);
        assert_eq!(url(&mut g, 1), 0);
        assert_eq!(dump(&g), before);
    }

    #[test]
    fn only_inner_loops() {
        let path = format!("{}/corpus/nested_loops.ir", env!("CARGO_MANIFEST_DIR"));
        let mut g = construct(&parse(&std::fs::read_to_string(path).unwrap()).unwrap()).unwrap().graph;
        let thetas = |g: &Graph| g.node_ids().filter(|&n| matches!(g.kind(n), NodeKind::Theta)).count();
        let before = thetas(&g);
        assert_eq!(url(&mut g, 4), 1);
        assert_eq!(thetas(&g), before, "the outer body is not replicated");
    }
}
