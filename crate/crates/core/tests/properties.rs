//! Property tests over generated modules and random operands.

use proptest::prelude::*;
use rvsdg::construct::construct;
use rvsdg::destruct::destruct;
use rvsdg::generate::{random_module, GenConfig};
use rvsdg::graph::{dump::dump, validate, BinOp};
use rvsdg::interp::{eval_bin, eval_cfg, eval_rvsdg, Trap, Value, DEFAULT_FUEL};
use rvsdg::opt::{dne::dne, run_pipeline, Pass, PassConfig};
use rvsdg::source::{parse, print_module, validate_module, Mode, Module};
use rvsdg::types::Type;

fn gen(seed: u64) -> Module {
    random_module(seed, &GenConfig::default())
}

fn main_args() -> impl Strategy<Value = Vec<Value>> {
    prop::collection::vec(-20i64..40, 3).prop_map(|v| v.into_iter().map(Value::i64).collect())
}

fn any_pass() -> impl Strategy<Value = Pass> {
    prop::sample::select(Pass::ALL.to_vec())
}

const BIN_OPS: [BinOp; 10] =
    [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Rem, BinOp::Shl, BinOp::Shr, BinOp::And, BinOp::Or, BinOp::Xor];

/// Native two's-complement reference for 8-bit operands.
fn native_i8(op: BinOp, a: i8, b: i8) -> Option<i8> {
    let sh = (b as u8 as u32) % 8;
    Some(match op {
        BinOp::Add => a.wrapping_add(b),
        BinOp::Sub => a.wrapping_sub(b),
        BinOp::Mul => a.wrapping_mul(b),
        BinOp::Div | BinOp::Rem if b == 0 => return None,
        BinOp::Div => a.wrapping_div(b),
        BinOp::Rem => a.wrapping_rem(b),
        BinOp::Shl => a.wrapping_shl(sh),
        BinOp::Shr => a.wrapping_shr(sh),
        BinOp::And => a & b,
        BinOp::Or => a | b,
        BinOp::Xor => a ^ b,
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn narrow_arithmetic_wraps_like_native(op in prop::sample::select(BIN_OPS.to_vec()), a: i8, b: i8) {
        let got = eval_bin(op, &Type::Int(8), &Value::int(8, a as i64), &Value::int(8, b as i64));
        match native_i8(op, a, b) {
            Some(want) => prop_assert_eq!(got, Ok(Value::int(8, want as i64))),
            None => prop_assert_eq!(got, Err(Trap::DivByZero)),
        }
    }

    #[test]
    fn constant_folding_agrees_with_the_interpreter(op in prop::sample::select(BIN_OPS.to_vec()), a in -300i64..300, b in -9i64..9) {
        let src = format!("export define i64 @f() {{\n  %x = {} i64 {a}, {b}\n  ret %x\n}}", op.name());
        let m = parse(&src).unwrap();
        let mut g = construct(&m).unwrap().graph;
        run_pipeline(&mut g, &PassConfig::only(vec![Pass::Red, Pass::Dne])).unwrap();
        prop_assert_eq!(eval_rvsdg(&g, "f", &[], DEFAULT_FUEL).map(|r| r.result), eval_cfg(&m, "f", &[], DEFAULT_FUEL).map(|r| r.result));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn printing_then_parsing_is_the_identity(seed: u64) {
        let m = gen(seed);
        prop_assert_eq!(parse(&print_module(&m)).unwrap(), m);
    }

    #[test]
    fn constructed_graphs_are_valid_and_equivalent(seed: u64, args in main_args()) {
        let m = gen(seed);
        let g = construct(&m).unwrap().graph;
        prop_assert!(validate(&g).is_empty(), "{:?}", validate(&g));
        prop_assert_eq!(eval_rvsdg(&g, "main", &args, DEFAULT_FUEL), eval_cfg(&m, "main", &args, DEFAULT_FUEL));
    }

    #[test]
    fn dne_is_idempotent(seed: u64) {
        let mut g = construct(&gen(seed)).unwrap().graph;
        dne(&mut g);
        let once = dump(&g);
        prop_assert_eq!(dne(&mut g), 0);
        prop_assert_eq!(dump(&g), once);
    }

    #[test]
    fn any_pass_sequence_keeps_graphs_valid_and_equivalent(
        seed: u64,
        passes in prop::collection::vec(any_pass(), 0..7),
        unroll_factor in 1u32..5,
        args in main_args(),
    ) {
        let m = gen(seed);
        let mut g = construct(&m).unwrap().graph;
        let cfg = PassConfig { passes, unroll_factor, disabled: vec![] };
        prop_assert!(run_pipeline(&mut g, &cfg).is_ok());
        prop_assert_eq!(eval_rvsdg(&g, "main", &args, DEFAULT_FUEL), eval_cfg(&m, "main", &args, DEFAULT_FUEL));
    }

    #[test]
    fn destruction_yields_reparseable_ssa(seed: u64, args in main_args()) {
        let m = gen(seed);
        let d = destruct(&construct(&m).unwrap().graph);
        prop_assert!(validate_module(&d, Mode::Ssa).is_empty());
        prop_assert_eq!(parse(&print_module(&d)).unwrap(), d.clone());
        prop_assert_eq!(eval_cfg(&d, "main", &args, DEFAULT_FUEL), eval_cfg(&m, "main", &args, DEFAULT_FUEL));
    }

    #[test]
    fn unrolling_preserves_counted_loops(factor in 1u32..7, n in 0i64..40) {
        let src = "export define i64 @f(i64 %n) {
entry:
  %s = copy i64 0
  %i = copy i64 0
  br label %loop
loop:
  %s = mul i64 %s, 3
  %s = add i64 %s, %i
  %i = add i64 %i, 1
  %c = lt i64 %i, %n
  branch i1 %c, [%done, %loop]
done:
  ret %s
}";
        let m = parse(src).unwrap();
        let mut g = construct(&m).unwrap().graph;
        run_pipeline(&mut g, &PassConfig { passes: vec![Pass::Url], unroll_factor: factor, disabled: vec![] }).unwrap();
        let args = [Value::i64(n)];
        prop_assert_eq!(eval_rvsdg(&g, "f", &args, DEFAULT_FUEL), eval_cfg(&m, "f", &args, DEFAULT_FUEL));
    }
}
