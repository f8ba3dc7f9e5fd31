//! Seeded generator of random source modules.
//!
//! Each module has an exported function `@main(i64, i64, i64)` with an
//! arbitrary CFG (loops, irreducible cycles, multi-way branches), a few
//! acyclic helper functions that may call each other recursively, an
//! optional global, a stack array and the `print_i64` / `ext_mix` externals.
//!
//! Every generated program terminates without trapping:
//! - each backward edge of `@main` passes through a guard block that
//!   decrements a shared budget and leaves for the exit block at zero;
//! - helpers take a depth argument and return immediately once it reaches 0;
//! - divisors are forced odd and array indices are masked into bounds.

use crate::graph::{BinOp, CmpOp, MatchTable};
use crate::source::{Block, Cfg, Function, Global, Inst, InstKind, Module, Operand, Term};
use crate::types::{Type, I1, I64};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Size knobs for [`random_module`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenConfig {
    /// Upper bound on the blocks of `@main` (at least 2 are generated).
    pub max_blocks: usize,
    /// Upper bound on the random instructions per block.
    pub max_insts: usize,
    pub max_helpers: usize,
    /// Backward edges `@main` may take per call.
    pub loop_budget: i64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { max_blocks: 16, max_insts: 6, max_helpers: 2, loop_budget: 12 }
    }
}

const ARRAY_LEN: u64 = 8;
const VARS: usize = 5;
const BINOPS: [BinOp; 8] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::And, BinOp::Or, BinOp::Xor, BinOp::Shl, BinOp::Shr];

fn var(s: &str) -> Operand {
    Operand::Var(s.to_string())
}

fn helper_type() -> Type {
    Type::func(vec![I64, I64], vec![I64])
}

fn inst(dst: &str, kind: InstKind) -> Inst {
    Inst { dst: Some(dst.to_string()), kind }
}

fn effect(kind: InstKind) -> Inst {
    Inst { dst: None, kind }
}

/// What a function body may touch.
struct Scope {
    helpers: usize,
    global: Option<String>,
    /// `@main` owns the stack array and the function-pointer variable.
    is_main: bool,
    /// Name of the depth parameter passed on to helpers.
    depth: String,
}

struct BodyGen<'a> {
    rng: &'a mut ChaCha8Rng,
    cfg: &'a GenConfig,
    scope: Scope,
    tmp: usize,
    calls_left: usize,
}

impl BodyGen<'_> {
    fn pick_var(&mut self) -> String {
        format!("x{}", self.rng.gen_range(0..VARS))
    }

    fn operand(&mut self) -> Operand {
        if self.rng.gen_bool(0.25) {
            Operand::Int(self.rng.gen_range(-3..10))
        } else {
            var(&self.pick_var())
        }
    }

    fn fresh(&mut self, base: &str) -> String {
        self.tmp += 1;
        format!("{base}{}", self.tmp)
    }

    fn random_insts(&mut self, out: &mut Vec<Inst>) {
        let n = self.rng.gen_range(1..=self.cfg.max_insts);
        for _ in 0..n {
            self.random_inst(out);
        }
    }

    fn random_inst(&mut self, out: &mut Vec<Inst>) {
        let dst = self.pick_var();
        match self.rng.gen_range(0..20) {
            0..=7 => {
                let op = *BINOPS.choose(self.rng).unwrap();
                let (a, b) = (self.operand(), self.operand());
                out.push(inst(&dst, InstKind::Bin(op, I64, a, b)));
            }
            8 => {
                let a = self.operand();
                out.push(inst(&dst, InstKind::Neg(I64, a)));
            }
            9 => {
                let d = self.fresh("d");
                let (a, b) = (self.operand(), self.operand());
                out.push(inst(&d, InstKind::Bin(BinOp::Or, I64, b, Operand::Int(1))));
                let op = if self.rng.gen_bool(0.5) { BinOp::Div } else { BinOp::Rem };
                out.push(inst(&dst, InstKind::Bin(op, I64, a, var(&d))));
            }
            10 | 11 if self.scope.is_main => {
                let p = self.element();
                out.extend(p.0);
                if self.rng.gen_bool(0.5) {
                    out.push(inst(&dst, InstKind::Load(I64, var(&p.1))));
                } else {
                    let v = self.operand();
                    out.push(effect(InstKind::Store(I64, v, var(&p.1))));
                }
            }
            12 if self.scope.global.is_some() => {
                let g = Operand::Sym(self.scope.global.clone().unwrap());
                if self.rng.gen_bool(0.5) {
                    out.push(inst(&dst, InstKind::Load(I64, g)));
                } else {
                    let v = self.operand();
                    out.push(effect(InstKind::Store(I64, v, g)));
                }
            }
            13 => {
                let v = self.operand();
                out.push(effect(InstKind::Call { ret: None, callee: Operand::Sym("print_i64".into()), args: vec![(I64, v)] }));
            }
            14 => {
                let (a, b) = (self.operand(), self.operand());
                out.push(inst(
                    &dst,
                    InstKind::Call { ret: Some(I64), callee: Operand::Sym("ext_mix".into()), args: vec![(I64, a), (I64, b)] },
                ));
            }
            15 | 16 if self.scope.helpers > 0 && self.calls_left > 0 => {
                self.calls_left -= 1;
                let h = self.rng.gen_range(0..self.scope.helpers);
                let callee = if self.scope.is_main && self.rng.gen_bool(0.3) {
                    out.push(inst("fp", InstKind::Copy(helper_type(), Operand::Sym(format!("h{h}")))));
                    var("fp")
                } else if self.scope.is_main && self.rng.gen_bool(0.3) {
                    var("fp")
                } else {
                    Operand::Sym(format!("h{h}"))
                };
                let a = self.operand();
                let depth = var(&self.scope.depth.clone());
                out.push(inst(&dst, InstKind::Call { ret: Some(I64), callee, args: vec![(I64, depth), (I64, a)] }));
            }
            _ => {
                let a = self.operand();
                out.push(inst(&dst, InstKind::Copy(I64, a)));
            }
        }
    }

    /// Address of a random element of the stack array.
    fn element(&mut self) -> (Vec<Inst>, String) {
        let i = self.fresh("i");
        let p = self.fresh("p");
        let v = self.operand();
        let code = vec![
            inst(&i, InstKind::Bin(BinOp::And, I64, v, Operand::Int(ARRAY_LEN as i64 - 1))),
            inst(&p, InstKind::Gep(I64, var("arr"), var(&i))),
        ];
        (code, p)
    }

    /// Terminator over `targets`: a jump for one target, a compare for two,
    /// and a match or masked integer selector beyond that.
    fn terminator(&mut self, insts: &mut Vec<Inst>, targets: Vec<String>) -> Term {
        match targets.len() {
            1 => Term::Br(targets.into_iter().next().unwrap()),
            2 => {
                let c = self.fresh("c");
                let op = *CmpOp::ALL.choose(self.rng).unwrap();
                let (a, b) = (self.operand(), self.operand());
                insts.push(inst(&c, InstKind::Cmp(op, I64, a, b)));
                Term::Branch(I1, var(&c), targets)
            }
            k => {
                let s = self.fresh("s");
                let a = self.operand();
                if self.rng.gen_bool(0.5) {
                    let cases = (0..k as u64 - 1).map(|i| (i * 3, i as u32)).collect();
                    let table = MatchTable { cases, default: k as u32 - 1, k: k as u32 };
                    insts.push(inst(&s, InstKind::Match(I64, a, table)));
                    Term::Branch(Type::narrowest_int(k as u32), var(&s), targets)
                } else {
                    insts.push(inst(&s, InstKind::Bin(BinOp::And, I64, a, Operand::Int(3))));
                    Term::Branch(I64, var(&s), targets)
                }
            }
        }
    }

    fn block(label: String, insts: Vec<Inst>, term: Term) -> Block {
        Block { label, phis: Vec::new(), insts, term }
    }

    /// Body of `@main`: arbitrary edges, guarded back edges.
    fn main_body(&mut self) -> Cfg {
        let n = self.rng.gen_range(2..=self.cfg.max_blocks.max(2));
        let label = |i: usize| if i == 0 { "entry".to_string() } else { format!("b{i}") };
        let exit = label(n - 1);
        let mut blocks = Vec::new();
        let mut guards = Vec::new();
        for i in 0..n {
            let mut insts = Vec::new();
            if i == 0 {
                let params = ["a", "b", "c"];
                for v in 0..VARS {
                    let init = if v < 3 { var(params[v]) } else { Operand::Int(v as i64) };
                    insts.push(inst(&format!("x{v}"), InstKind::Copy(I64, init)));
                }
                insts.push(inst("budget", InstKind::Copy(I64, Operand::Int(self.cfg.loop_budget))));
                insts.push(inst("arr", InstKind::Alloca(I64, ARRAY_LEN)));
                insts.push(inst("depth", InstKind::Bin(BinOp::And, I64, var("c"), Operand::Int(3))));
                if self.scope.helpers > 0 {
                    insts.push(inst("fp", InstKind::Copy(helper_type(), Operand::Sym("h0".into()))));
                }
            }
            if i == n - 1 {
                if self.rng.gen_bool(0.5) {
                    let v = self.operand();
                    insts.push(effect(InstKind::Call { ret: None, callee: Operand::Sym("print_i64".into()), args: vec![(I64, v)] }));
                }
                let r = self.operand();
                blocks.push(Self::block(exit.clone(), insts, Term::Ret(Some(r))));
                break;
            }
            self.random_insts(&mut insts);
            let k = match self.rng.gen_range(0..10) {
                0..=3 => 1,
                4..=8 => 2,
                _ => 3,
            };
            // The fallthrough edge keeps every block reachable.
            let mut ts: Vec<usize> = vec![i + 1];
            while ts.len() < k {
                ts.push(self.rng.gen_range(1..n));
            }
            ts.shuffle(self.rng);
            let targets = ts
                .into_iter()
                .map(|t| {
                    if t > i {
                        return label(t);
                    }
                    let g = format!("guard{}", guards.len());
                    guards.push(Self::block(
                        g.clone(),
                        vec![
                            inst("budget", InstKind::Bin(BinOp::Sub, I64, var("budget"), Operand::Int(1))),
                            inst("more", InstKind::Cmp(CmpOp::Gt, I64, var("budget"), Operand::Int(0))),
                        ],
                        Term::Branch(I1, var("more"), vec![exit.clone(), label(t)]),
                    ));
                    g
                })
                .collect();
            let term = self.terminator(&mut insts, targets);
            blocks.push(Self::block(label(i), insts, term));
        }
        blocks.extend(guards);
        Cfg { blocks }
    }

    /// Body of a helper `@h(depth, x)`: returns `x` at depth 0, otherwise
    /// runs an acyclic CFG that may call helpers with `depth - 1`.
    fn helper_body(&mut self) -> Cfg {
        let n = self.rng.gen_range(1..=(self.cfg.max_blocks / 3).max(1));
        let label = |i: usize| format!("b{i}");
        let mut blocks = vec![Self::block(
            "entry".into(),
            vec![
                inst("stop", InstKind::Cmp(CmpOp::Le, I64, var("depth"), Operand::Int(0))),
                inst("next", InstKind::Bin(BinOp::Sub, I64, var("depth"), Operand::Int(1))),
            ],
            Term::Branch(I1, var("stop"), vec![label(0), "base".into()]),
        )];
        for i in 0..n {
            let mut insts = Vec::new();
            if i == 0 {
                insts.push(inst("x0", InstKind::Copy(I64, var("x"))));
                for v in 1..VARS {
                    insts.push(inst(&format!("x{v}"), InstKind::Bin(BinOp::Mul, I64, var("x"), Operand::Int(v as i64))));
                }
            }
            self.random_insts(&mut insts);
            let term = if i == n - 1 {
                Term::Ret(Some(self.operand()))
            } else {
                let mut ts = vec![i + 1];
                if self.rng.gen_bool(0.5) {
                    ts.push(self.rng.gen_range(i + 1..n));
                }
                ts.shuffle(self.rng);
                self.terminator(&mut insts, ts.into_iter().map(label).collect())
            };
            blocks.push(Self::block(label(i), insts, term));
        }
        blocks.push(Self::block("base".into(), Vec::new(), Term::Ret(Some(var("x")))));
        Cfg { blocks }
    }
}

/// Generate one module from `seed`.
pub fn random_module(seed: u64, cfg: &GenConfig) -> Module {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let helpers = rng.gen_range(0..=cfg.max_helpers);
    let global = rng.gen_bool(0.5).then(|| "g0".to_string());
    let mut m = Module { globals: Vec::new(), functions: Vec::new() };
    m.functions.push(Function { name: "print_i64".into(), params: vec![("p0".into(), I64)], ret: None, exported: false, body: None });
    m.functions.push(Function {
        name: "ext_mix".into(),
        params: vec![("p0".into(), I64), ("p1".into(), I64)],
        ret: Some(I64),
        exported: false,
        body: None,
    });
    if let Some(g) = &global {
        let v = rng.gen_range(-5..50);
        let init = Cfg {
            blocks: vec![Block { label: "entry".into(), phis: Vec::new(), insts: Vec::new(), term: Term::Ret(Some(Operand::Int(v))) }],
        };
        m.globals.push(Global { name: g.clone(), ty: I64, exported: false, init: Some(init) });
    }
    for h in 0..helpers {
        let scope = Scope { helpers, global: global.clone(), is_main: false, depth: "next".into() };
        let mut gen = BodyGen { rng: &mut rng, cfg, scope, tmp: 0, calls_left: 2 };
        let body = gen.helper_body();
        m.functions.push(Function {
            name: format!("h{h}"),
            params: vec![("depth".into(), I64), ("x".into(), I64)],
            ret: Some(I64),
            exported: false,
            body: Some(body),
        });
    }
    let scope = Scope { helpers, global, is_main: true, depth: "depth".into() };
    let mut gen = BodyGen { rng: &mut rng, cfg, scope, tmp: 0, calls_left: 4 };
    let body = gen.main_body();
    m.functions.push(Function {
        name: "main".into(),
        params: vec![("a".into(), I64), ("b".into(), I64), ("c".into(), I64)],
        ret: Some(I64),
        exported: true,
        body: Some(body),
    });
    m
}

/// `count` modules from consecutive seeds starting at `seed`.
pub fn random_corpus(seed: u64, count: usize, cfg: &GenConfig) -> Vec<Module> {
    (0..count as u64).map(|i| random_module(seed.wrapping_add(i), cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::eval_cfg;
    use crate::interp::oracle::sample_args;
    use crate::source::{parse, print_module, validate_module, Mode};

    #[test]
    fn modules_are_valid_and_reparse() {
        for seed in 0..200 {
            let m = random_module(seed, &GenConfig::default());
            let errs = validate_module(&m, Mode::NonSsa);
            assert!(errs.is_empty(), "seed {seed}: {errs:?}\n{}", print_module(&m));
            let text = print_module(&m);
            assert_eq!(parse(&text).unwrap(), m, "seed {seed}");
        }
    }

    #[test]
    fn programs_terminate_without_traps() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for seed in 0..200 {
            let m = random_module(seed, &GenConfig::default());
            for _ in 0..10 {
                let args = sample_args(&[I64, I64, I64], &mut rng);
                let r = eval_cfg(&m, "main", &args, crate::interp::DEFAULT_FUEL);
                assert!(r.is_ok(), "seed {seed} {args:?}: {r:?}\n{}", print_module(&m));
            }
        }
    }

    #[test]
    fn same_seed_same_module() {
        let c = GenConfig::default();
        assert_eq!(random_module(42, &c), random_module(42, &c));
        assert_ne!(random_module(42, &c), random_module(43, &c));
    }
}
