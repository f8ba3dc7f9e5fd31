//! Evaluator for source modules.
//!
//! Functions are lowered on first use to a slot-indexed form so that the
//! hot loop does no string hashing. Reading a variable that has not been
//! assigned yields the zero of its type, like `undef`.

use super::builtins::call_external;
use super::*;
use crate::source::{Cfg, InstKind, Module, Operand, Term};
use std::collections::HashMap;
use std::rc::Rc;

#[derive(Clone, Debug)]
enum COp {
    Slot(u32, Type),
    Const(Value),
}

#[derive(Debug)]
enum CKind {
    Bin(BinOp, Type, COp, COp),
    Neg(Type, COp),
    Cmp(CmpOp, Type, COp, COp),
    Copy(COp),
    Match(MatchTable, u8, COp),
    Alloca(u64),
    Load(Type, COp),
    Store(COp, COp),
    Gep(COp, COp),
    Call(COp, Vec<COp>),
}

#[derive(Debug)]
enum CTerm {
    Br(usize),
    Branch(COp, Vec<usize>),
    Ret(Option<COp>),
}

#[derive(Debug)]
struct CBlock {
    /// Per phi: destination slot and incoming `(pred block, value)`.
    phis: Vec<(u32, Vec<(usize, COp)>)>,
    insts: Vec<(Option<u32>, CKind)>,
    term: CTerm,
}

#[derive(Debug)]
struct CFn {
    slots: usize,
    params: Vec<u32>,
    blocks: Vec<CBlock>,
}

struct Lowering<'a> {
    module: &'a Module,
    slots: HashMap<String, u32>,
}

impl Lowering<'_> {
    fn slot(&mut self, v: &str) -> u32 {
        let n = self.slots.len() as u32;
        *self.slots.entry(v.to_string()).or_insert(n)
    }

    fn operand(&mut self, o: &Operand, ty: &Type) -> COp {
        match o {
            Operand::Var(v) => COp::Slot(self.slot(v), ty.clone()),
            Operand::Int(i) => COp::Const(match ty {
                Type::Int(w) => Value::int(*w, *i),
                Type::F64 => Value::F64(*i as f64),
                t => Value::zero(t),
            }),
            Operand::Float(f) => COp::Const(Value::F64(*f)),
            Operand::Undef => COp::Const(Value::zero(ty)),
            Operand::Sym(s) => COp::Const(symbol_value(self.module, s)),
        }
    }

    fn lower(mut self, params: &[(String, Type)], ret: Option<&Type>, cfg: &Cfg) -> CFn {
        let params = params.iter().map(|(p, _)| self.slot(p)).collect();
        let labels = cfg.label_map();
        let ptr = Type::Ptr;
        let i64t = Type::Int(64);
        let mut blocks = Vec::with_capacity(cfg.blocks.len());
        for b in &cfg.blocks {
            let phis = b
                .phis
                .iter()
                .map(|p| {
                    let inc = p.incoming.iter().map(|(o, l)| (labels[l], self.operand(o, &p.ty))).collect();
                    (self.slot(&p.dst), inc)
                })
                .collect();
            let mut insts = Vec::with_capacity(b.insts.len());
            for i in &b.insts {
                let k = match &i.kind {
                    InstKind::Bin(op, t, a, c) => CKind::Bin(*op, t.clone(), self.operand(a, t), self.operand(c, t)),
                    InstKind::Neg(t, a) => CKind::Neg(t.clone(), self.operand(a, t)),
                    InstKind::Cmp(op, t, a, c) => CKind::Cmp(*op, t.clone(), self.operand(a, t), self.operand(c, t)),
                    InstKind::Copy(t, a) => CKind::Copy(self.operand(a, t)),
                    InstKind::Match(t, a, table) => {
                        let Type::Int(w) = Type::narrowest_int(table.k) else { unreachable!() };
                        CKind::Match(table.clone(), w, self.operand(a, t))
                    }
                    InstKind::Alloca(_, n) => CKind::Alloca(*n),
                    InstKind::Load(t, p) => CKind::Load(t.clone(), self.operand(p, &ptr)),
                    InstKind::Store(t, v, p) => CKind::Store(self.operand(v, t), self.operand(p, &ptr)),
                    InstKind::Gep(_, b, x) => CKind::Gep(self.operand(b, &ptr), self.operand(x, &i64t)),
                    InstKind::Call { ret, callee, args } => {
                        let fty = Type::func(args.iter().map(|(t, _)| t.clone()).collect(), ret.iter().cloned().collect());
                        let callee = self.operand(callee, &fty);
                        let args = args.iter().map(|(t, a)| self.operand(a, t)).collect();
                        CKind::Call(callee, args)
                    }
                };
                let dst = i.dst.as_ref().map(|d| self.slot(d));
                insts.push((dst, k));
            }
            let term = match &b.term {
                Term::Br(l) => CTerm::Br(labels[l]),
                Term::Branch(t, o, ts) => CTerm::Branch(self.operand(o, t), ts.iter().map(|l| labels[l]).collect()),
                Term::Ret(o) => CTerm::Ret(o.as_ref().map(|o| self.operand(o, ret.unwrap_or(&i64t)))),
            };
            blocks.push(CBlock { phis, insts, term });
        }
        CFn { slots: self.slots.len(), params, blocks }
    }
}

fn symbol_value(m: &Module, s: &str) -> Value {
    if m.global(s).is_some() {
        Value::Ptr(Ptr { base: Base::Global(Arc::from(s)), off: 0 })
    } else {
        Value::Fn(Arc::from(s))
    }
}

/// Interpreter state for one module.
pub struct CfgInterp<'m> {
    module: &'m Module,
    compiled: HashMap<String, Rc<CFn>>,
    pub machine: Machine,
}

impl<'m> CfgInterp<'m> {
    /// Allocate and initialize all globals.
    pub fn new(module: &'m Module, fuel: u64) -> Result<CfgInterp<'m>, Trap> {
        let mut it = CfgInterp { module, compiled: HashMap::new(), machine: Machine::new(fuel) };
        let mut globals: Vec<_> = module.globals.iter().collect();
        globals.sort_by(|a, b| a.name.cmp(&b.name));
        for g in &globals {
            it.machine.define_global(&g.name, None);
        }
        for g in globals {
            if let Some(init) = &g.init {
                let f = Rc::new(Lowering { module, slots: HashMap::new() }.lower(&[], Some(&g.ty), init));
                let v = it.run(&f, Vec::new())?;
                it.machine.define_global(&g.name, v);
            }
        }
        Ok(it)
    }

    /// Call function `name` with `args`.
    pub fn call(&mut self, name: &str, args: Vec<Value>) -> Result<Option<Value>, Trap> {
        let Some(f) = self.module.function(name) else { return Err(Trap::Unresolved(name.to_string())) };
        let Some(body) = &f.body else {
            return call_external(name, &args, f.ret.as_ref(), &mut self.machine);
        };
        if args.len() != f.params.len() {
            return Err(Trap::BadProgram(format!("@{name} expects {} arguments", f.params.len())));
        }
        let cf = match self.compiled.get(name) {
            Some(c) => c.clone(),
            None => {
                let c = Rc::new(Lowering { module: self.module, slots: HashMap::new() }.lower(&f.params, f.ret.as_ref(), body));
                self.compiled.insert(name.to_string(), c.clone());
                c
            }
        };
        self.machine.enter()?;
        let r = self.run(&cf, args);
        self.machine.leave();
        r
    }

    fn run(&mut self, f: &CFn, args: Vec<Value>) -> Result<Option<Value>, Trap> {
        let mut env: Vec<Option<Value>> = vec![None; f.slots];
        for (s, a) in f.params.iter().zip(args) {
            env[*s as usize] = Some(a);
        }
        fn get(env: &[Option<Value>], o: &COp) -> Value {
            match o {
                COp::Slot(s, t) => env[*s as usize].clone().unwrap_or_else(|| Value::zero(t)),
                COp::Const(v) => v.clone(),
            }
        }
        let mut cur = 0usize;
        let mut prev = usize::MAX;
        loop {
            let b = &f.blocks[cur];
            if !b.phis.is_empty() {
                let mut vals = Vec::with_capacity(b.phis.len());
                for (dst, inc) in &b.phis {
                    let o = inc
                        .iter()
                        .find(|(p, _)| *p == prev)
                        .map(|(_, o)| o)
                        .ok_or_else(|| Trap::BadProgram("phi without matching predecessor".into()))?;
                    vals.push((*dst, get(&env, o)));
                }
                for (d, v) in vals {
                    self.machine.tick()?;
                    env[d as usize] = Some(v);
                }
            }
            for (dst, k) in &b.insts {
                self.machine.tick()?;
                let v = match k {
                    CKind::Bin(op, t, a, c) => Some(eval_bin(*op, t, &get(&env, a), &get(&env, c))?),
                    CKind::Neg(t, a) => Some(eval_neg(t, &get(&env, a))?),
                    CKind::Cmp(op, t, a, c) => Some(eval_cmp(*op, t, &get(&env, a), &get(&env, c))?),
                    CKind::Copy(a) => Some(get(&env, a)),
                    CKind::Match(table, w, a) => Some(Value::int(*w, eval_match(table, &get(&env, a))? as i64)),
                    CKind::Alloca(n) => Some(self.machine.alloca(*n)),
                    CKind::Load(t, p) => Some(self.machine.load(&get(&env, p), t)?),
                    CKind::Store(v, p) => {
                        self.machine.store(&get(&env, p), get(&env, v))?;
                        None
                    }
                    CKind::Gep(b, x) => Some(eval_gep(&get(&env, b), &get(&env, x))?),
                    CKind::Call(callee, args) => {
                        let Value::Fn(name) = get(&env, callee) else {
                            return Err(Trap::TypeConfusion("call through non-function".into()));
                        };
                        let args = args.iter().map(|a| get(&env, a)).collect();
                        self.call(&name, args)?
                    }
                };
                if let (Some(d), Some(v)) = (dst, v) {
                    env[*d as usize] = Some(v);
                }
            }
            self.machine.tick()?;
            prev = cur;
            cur = match &b.term {
                CTerm::Br(t) => *t,
                CTerm::Branch(o, ts) => ts[branch_index(&get(&env, o), ts.len())?],
                CTerm::Ret(o) => return Ok(o.as_ref().map(|o| get(&env, o))),
            };
        }
    }
}

/// Evaluate `@name(args)` in a fresh machine.
pub fn eval_cfg(module: &Module, name: &str, args: &[Value], fuel: u64) -> Result<Run, Trap> {
    let mut it = CfgInterp::new(module, fuel)?;
    let result = it.call(name, args.to_vec())?;
    Ok(Run { result, trace: it.machine.trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::parse;

    const GCD: &str = "define i64 @gcd(i64 %a, i64 %b) {
entry:
  br label %head
head:
  %c = ne i64 %b, 0
  branch i1 %c, [%done, %body]
body:
  %t = rem i64 %a, %b
  %a = copy i64 %b
  %b = copy i64 %t
  br label %head
done:
  ret %a
}";

    #[test]
    fn gcd() {
        let m = parse(GCD).unwrap();
        let r = eval_cfg(&m, "gcd", &[Value::i64(12), Value::i64(8)], DEFAULT_FUEL).unwrap();
        assert_eq!(r.result, Some(Value::i64(4)));
        assert!(r.trace.is_empty());
    }

    #[test]
    fn fuel_runs_out() {
        let m = parse("define void @f() {\nentry:\n  br label %l\nl:\n  %c = eq i64 0, 1\n  branch i1 %c, [%l, %x]\nx:\n  ret\n}").unwrap();
        assert_eq!(eval_cfg(&m, "f", &[], 1000), Err(Trap::OutOfFuel));
    }

    #[test]
    fn globals_and_phis() {
        let src = "global i64 @g = {\n  ret 7\n}
define i64 @f(i64 %n) {
entry:
  %x = load i64 @g
  %c = lt i64 %n, 0
  branch i1 %c, [%a, %b]
a:
  br label %j
b:
  store i64 %n, @g
  br label %j
j:
  %r = phi i64 [%x, %a], [%n, %b]
  call void @print_i64(i64 %r)
  ret %r
}
external @print_i64 : fn(i64) -> void";
        let m = parse(src).unwrap();
        let r = eval_cfg(&m, "f", &[Value::i64(3)], DEFAULT_FUEL).unwrap();
        assert_eq!(r.result, Some(Value::i64(7)));
        assert_eq!(r.render(), "result i64 7\nload @g+0\nio print_i64 i64 7\n");
        let r = eval_cfg(&m, "f", &[Value::i64(-1)], DEFAULT_FUEL).unwrap();
        assert_eq!(r.render(), "result i64 -1\nload @g+0\nstore @g+0 <- i64 -1\nio print_i64 i64 -1\n");
    }
}
