//! Invariant value redirection.
//!
//! Users of a θ output whose loop variable passes its argument straight
//! through are redirected to the θ input. Users of a γ output whose every
//! alternative returns the same entry variable are redirected to that entry
//! variable's input. Loop variables of io type are left alone: they keep a
//! loop that might not terminate ordered before later io effects.

use super::structural_postorder;
use crate::graph::views;
use crate::graph::{Graph, NodeKind, Origin};
use crate::types::Type;

/// Redirect invariant values to a fixpoint; returns the number of users moved.
pub fn inv(g: &mut Graph) -> usize {
    let mut total = 0;
    loop {
        let moved = inv_once(g);
        if moved == 0 {
            return total;
        }
        total += moved;
    }
}

fn inv_once(g: &mut Graph) -> usize {
    let mut moved = 0;
    for n in structural_postorder(g, |k| matches!(k, NodeKind::Gamma | NodeKind::Theta)) {
        match g.kind(n) {
            NodeKind::Theta => {
                for l in 0..views::num_loop_vars(g, n) {
                    let lv = views::loop_var(g, n, l);
                    if lv.result == Some(lv.arg) && *g.origin_ty(lv.arg) != Type::Io {
                        moved += g.divert_users(lv.output, lv.input).expect("loop input has the output's type");
                    }
                }
            }
            NodeKind::Gamma => {
                for l in 0..g.num_outputs(n) {
                    let ex = views::exit_var(g, n, l);
                    let entry = match ex.results[0] {
                        Some(Origin::Arg(_, e)) => e as usize,
                        _ => continue,
                    };
                    let same = ex.results.iter().zip(g.subregions(n)).all(|(o, &r)| *o == Some(Origin::Arg(r, entry as u32)));
                    if same {
                        let input = g.input(n, entry + 1);
                        moved += g.divert_users(ex.output, input).expect("entry input has the output's type");
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    moved
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::construct;
    use crate::graph::validate;
    use crate::source::parse;

    #[test]
    fn pass_through_loop_variable_is_redirected() {
        let src = "export define i64 @f(i64 %a, i64 %n) {
entry:
  %i = copy i64 0
  br label %loop
loop:
  %i = add i64 %i, 1
  %c = lt i64 %i, %n
  branch i1 %c, [%out, %loop]
out:
  %r = add i64 %a, %i
  ret %r
}";
        let mut g = construct(&parse(src).unwrap()).unwrap().graph;
        let t = g.node_ids().find(|&n| matches!(g.kind(n), NodeKind::Theta)).unwrap();
        let a = (0..views::num_loop_vars(&g, t)).find(|&l| {
            let lv = views::loop_var(&g, t, l);
            lv.result == Some(lv.arg) && matches!(lv.input, Origin::Arg(..)) && g.origin_ty(lv.arg) == &Type::Int(64)
        });
        let a = a.expect("%a is carried through the loop");
        assert!(!g.users(Origin::Out(t, a as u32)).is_empty());
        assert!(inv(&mut g) > 0);
        assert!(g.users(Origin::Out(t, a as u32)).is_empty());
        assert!(validate(&g).is_empty());
        assert_eq!(inv(&mut g), 0);
    }
}
