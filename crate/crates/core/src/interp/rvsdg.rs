//! Evaluator for graphs.
//!
//! Only the live slice of each region is evaluated: nodes from which a
//! region result is reachable. Per-region evaluation plans (live nodes in
//! topological order, with inputs resolved to flat value slots) are built
//! once and cached.

use super::builtins::call_external;
use super::*;
use crate::graph::topo::topo;
use crate::graph::views::{num_context_vars, recursion_var};
use crate::graph::{Graph, NodeId, NodeKind, Op, Origin, RegionId};
use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

#[derive(Clone, Copy, Debug)]
enum Src {
    Arg(u32),
    Val(u32),
}

#[derive(Debug)]
struct Step {
    node: NodeId,
    inputs: Vec<Src>,
}

#[derive(Debug)]
struct Plan {
    steps: Vec<Step>,
    results: Vec<Src>,
}

pub struct RvsdgInterp<'g> {
    g: &'g Graph,
    plans: Vec<Option<Rc<Plan>>>,
    lambdas: HashMap<Arc<str>, NodeId>,
    statics: HashMap<Origin, Value>,
    pub machine: Machine,
}

impl<'g> RvsdgInterp<'g> {
    /// Resolve the static structure of the root region and initialize every
    /// global variable.
    pub fn new(g: &'g Graph, fuel: u64) -> Result<RvsdgInterp<'g>, Trap> {
        let mut it = RvsdgInterp {
            g,
            plans: vec![None; g.region_capacity()],
            lambdas: HashMap::new(),
            statics: HashMap::new(),
            machine: Machine::new(fuel),
        };
        let root = g.root();
        for (i, imp) in g.imports.iter().enumerate() {
            let v = match imp.ty {
                Type::Fn(_) => Value::Fn(Arc::from(imp.name.as_str())),
                _ => {
                    it.machine.define_global(&imp.name, None);
                    Value::Ptr(Ptr { base: Base::Global(Arc::from(imp.name.as_str())), off: 0 })
                }
            };
            it.statics.insert(Origin::Arg(root, i as u32), v);
        }
        let mut deltas = Vec::new();
        it.resolve_statics(root, &mut deltas);
        deltas.sort_by(|a, b| a.0.cmp(&b.0));
        for (name, _) in &deltas {
            it.machine.define_global(name, None);
        }
        for (name, n) in deltas {
            let ctx = it.context_values(n)?;
            let body = g.subregions(n)[0];
            let v = it.eval_region(body, ctx)?.into_iter().next();
            it.machine.define_global(&name, v);
        }
        Ok(it)
    }

    fn resolve_statics(&mut self, r: RegionId, deltas: &mut Vec<(String, NodeId)>) {
        let g = self.g;
        for n in topo(g, r) {
            match g.kind(n) {
                NodeKind::Lambda { name, .. } => {
                    let name: Arc<str> = Arc::from(name.as_str());
                    self.lambdas.insert(name.clone(), n);
                    self.statics.insert(Origin::Out(n, 0), Value::Fn(name));
                }
                NodeKind::Delta { name, .. } => {
                    deltas.push((name.clone(), n));
                    let p = Ptr { base: Base::Global(Arc::from(name.as_str())), off: 0 };
                    self.statics.insert(Origin::Out(n, 0), Value::Ptr(p));
                }
                NodeKind::Phi => {
                    let body = g.subregions(n)[0];
                    let cv = num_context_vars(g, n);
                    for i in 0..cv {
                        if let Some(v) = self.statics.get(&g.input(n, i)).cloned() {
                            self.statics.insert(Origin::Arg(body, i as u32), v);
                        }
                    }
                    // Recursion variables are bound to the definitions in the body.
                    for l in 0..g.num_outputs(n) {
                        let rv = recursion_var(g, n, l);
                        if let Some(v) = rv.result.and_then(Graph::producer).and_then(|m| self.definition_value(m)) {
                            self.statics.insert(rv.arg, v.clone());
                            self.statics.insert(rv.output, v);
                        }
                    }
                    self.resolve_statics(body, deltas);
                }
                _ => {}
            }
        }
    }

    fn definition_value(&self, n: NodeId) -> Option<Value> {
        match self.g.kind(n) {
            NodeKind::Lambda { name, .. } => Some(Value::Fn(Arc::from(name.as_str()))),
            NodeKind::Delta { name, .. } => Some(Value::Ptr(Ptr { base: Base::Global(Arc::from(name.as_str())), off: 0 })),
            _ => None,
        }
    }

    fn context_values(&self, n: NodeId) -> Result<Vec<Value>, Trap> {
        (0..num_context_vars(self.g, n))
            .map(|i| {
                let o = self.g.input(n, i);
                self.statics.get(&o).cloned().ok_or_else(|| Trap::BadProgram(format!("context origin {o} is not static")))
            })
            .collect()
    }

    fn plan(&mut self, r: RegionId) -> Rc<Plan> {
        if let Some(p) = &self.plans[r.0 as usize] {
            return p.clone();
        }
        let g = self.g;
        let results: Vec<Origin> = (0..g.region(r).results.len()).filter_map(|i| g.result(r, i)).collect();
        let mut live = BTreeSet::new();
        let mut stack: Vec<NodeId> = results.iter().filter_map(|o| Graph::producer(*o)).collect();
        while let Some(n) = stack.pop() {
            if live.insert(n) {
                stack.extend(g.inputs(n).into_iter().filter_map(Graph::producer));
            }
        }
        let mut base: HashMap<NodeId, u32> = HashMap::new();
        let mut next = 0u32;
        let mut steps = Vec::new();
        let src = |base: &HashMap<NodeId, u32>, o: Origin| match o {
            Origin::Arg(_, i) => Src::Arg(i),
            Origin::Out(n, i) => Src::Val(base[&n] + i),
        };
        for n in topo(g, r) {
            if !live.contains(&n) {
                continue;
            }
            let inputs = g.inputs(n).into_iter().map(|o| src(&base, o)).collect();
            base.insert(n, next);
            next += g.num_outputs(n) as u32;
            steps.push(Step { node: n, inputs });
        }
        let results = results.into_iter().map(|o| src(&base, o)).collect();
        let p = Rc::new(Plan { steps, results });
        self.plans[r.0 as usize] = Some(p.clone());
        p
    }

    fn eval_region(&mut self, r: RegionId, args: Vec<Value>) -> Result<Vec<Value>, Trap> {
        let plan = self.plan(r);
        let mut vals: Vec<Value> = Vec::new();
        let get = |vals: &[Value], s: Src| match s {
            Src::Arg(i) => args[i as usize].clone(),
            Src::Val(i) => vals[i as usize].clone(),
        };
        for step in &plan.steps {
            let ins: Vec<Value> = step.inputs.iter().map(|s| get(&vals, *s)).collect();
            let outs = self.eval_node(step.node, ins)?;
            vals.extend(outs);
        }
        Ok(plan.results.iter().map(|s| get(&vals, *s)).collect())
    }

    fn eval_node(&mut self, n: NodeId, ins: Vec<Value>) -> Result<Vec<Value>, Trap> {
        let g = self.g;
        match g.kind(n) {
            NodeKind::Simple(op) => {
                self.machine.tick()?;
                self.eval_simple(op, ins)
            }
            NodeKind::Gamma => {
                let Value::Ctl { idx, .. } = ins[0] else {
                    return Err(Trap::TypeConfusion(format!("γ predicate {}", ins[0])));
                };
                let r = g.subregions(n)[idx as usize];
                self.eval_region(r, ins[1..].to_vec())
            }
            NodeKind::Theta => {
                let body = g.subregions(n)[0];
                let mut vars = ins;
                loop {
                    self.machine.tick()?;
                    let mut res = self.eval_region(body, vars)?;
                    let pred = res.remove(0);
                    vars = res;
                    match pred {
                        Value::Ctl { idx: 0, .. } => return Ok(vars),
                        Value::Ctl { .. } => {}
                        v => return Err(Trap::TypeConfusion(format!("θ predicate {v}"))),
                    }
                }
            }
            _ => Err(Trap::BadProgram(format!("{n} cannot be evaluated dynamically"))),
        }
    }

    fn eval_simple(&mut self, op: &Op, ins: Vec<Value>) -> Result<Vec<Value>, Trap> {
        Ok(match op {
            Op::Bin(b, t) => vec![eval_bin(*b, t, &ins[0], &ins[1])?],
            Op::Neg(t) => vec![eval_neg(t, &ins[0])?],
            Op::Cmp(c, t) => vec![eval_cmp(*c, t, &ins[0], &ins[1])?],
            Op::Const(l) => vec![Value::lit(l)],
            Op::Undef(t) => vec![Value::zero(t)],
            Op::Match { table, .. } => vec![Value::Ctl { idx: eval_match(table, &ins[0])?, k: table.k }],
            Op::Alloca { count, .. } => vec![self.machine.alloca(*count), Value::State],
            Op::Load(t) => vec![self.machine.load(&ins[0], t)?, Value::State],
            Op::Store(_) => {
                self.machine.store(&ins[0], ins[1].clone())?;
                vec![Value::State]
            }
            Op::Gep(_) => vec![eval_gep(&ins[0], &ins[1])?],
            Op::Apply(sig) => {
                let Value::Fn(name) = &ins[0] else {
                    return Err(Trap::TypeConfusion(format!("apply of {}", ins[0])));
                };
                match self.lambdas.get(name).copied() {
                    Some(lam) => self.call_lambda(lam, ins[1..].to_vec())?,
                    None => {
                        let args: Vec<Value> = ins[1..].iter().filter(|v| !matches!(v, Value::State)).cloned().collect();
                        let ret = sig.results.iter().find(|t| !t.is_state());
                        let mut r = call_external(name, &args, ret, &mut self.machine)?;
                        sig.results
                            .iter()
                            .map(|t| if t.is_state() { Value::State } else { r.take().unwrap_or_else(|| Value::zero(t)) })
                            .collect()
                    }
                }
            }
        })
    }

    fn call_lambda(&mut self, lam: NodeId, args: Vec<Value>) -> Result<Vec<Value>, Trap> {
        let mut full = self.context_values(lam)?;
        full.extend(args);
        let body = self.g.subregions(lam)[0];
        self.machine.enter()?;
        let r = self.eval_region(body, full);
        self.machine.leave();
        r
    }

    /// Call the exported function `name` with source-level arguments and
    /// return its (non-state) result.
    pub fn call_export(&mut self, name: &str, args: &[Value]) -> Result<Option<Value>, Trap> {
        let o = self.g.export_origin(name).ok_or_else(|| Trap::Unresolved(name.to_string()))?;
        let Some(Value::Fn(f)) = self.statics.get(&o).cloned() else {
            return Err(Trap::Unresolved(name.to_string()));
        };
        let Some(&lam) = self.lambdas.get(&f) else { return Err(Trap::Unresolved(f.to_string())) };
        let NodeKind::Lambda { sig, .. } = self.g.kind(lam) else { unreachable!() };
        let nvals = sig.params.iter().filter(|t| !t.is_state()).count();
        if args.len() != nvals {
            return Err(Trap::BadProgram(format!("@{name} expects {nvals} arguments")));
        }
        let mut full: Vec<Value> = args.to_vec();
        full.extend(sig.params.iter().filter(|t| t.is_state()).map(|_| Value::State));
        let res = self.call_lambda(lam, full)?;
        Ok(res.into_iter().find(|v| !matches!(v, Value::State)))
    }
}

/// Evaluate the exported function `name` in a fresh machine.
pub fn eval_rvsdg(g: &Graph, name: &str, args: &[Value], fuel: u64) -> Result<Run, Trap> {
    let mut it = RvsdgInterp::new(g, fuel)?;
    let result = it.call_export(name, args)?;
    Ok(Run { result, trace: it.machine.trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{BinOp, CmpOp, Lit, MatchTable};
    use crate::types::{FnSig, I64};

    /// `sum(n)`: adds 0..n in a do-while loop (at least one iteration).
    fn sum_graph() -> Graph {
        let mut g = Graph::new();
        let root = g.root();
        let sig = FnSig { params: vec![I64], results: vec![I64] }.lower();
        let lam = g.add_lambda(root, "sum", sig);
        let body = g.subregions(lam)[0];
        let n = Origin::Arg(body, 0);
        let zero = g.add_const(body, Lit::int(64, 0));
        let t = g.add_theta(body);
        let tb = g.subregions(t)[0];
        let i = g.add_loop_var(t, zero).unwrap();
        let acc = g.add_loop_var(t, zero).unwrap();
        let nn = g.add_loop_var(t, n).unwrap();
        let (ia, acca, na) = (Origin::Arg(tb, i as u32), Origin::Arg(tb, acc as u32), Origin::Arg(tb, nn as u32));
        let acc2 = g.simple_out(tb, Op::Bin(BinOp::Add, I64), &[acca, ia]).unwrap();
        let one = g.add_const(tb, Lit::int(64, 1));
        let i2 = g.simple_out(tb, Op::Bin(BinOp::Add, I64), &[ia, one]).unwrap();
        let c = g.simple_out(tb, Op::Cmp(CmpOp::Lt, I64), &[i2, na]).unwrap();
        let p = g.simple_out(tb, Op::Match { ty: Type::Int(1), table: MatchTable::identity(2) }, &[c]).unwrap();
        g.set_result(tb, 0, p).unwrap();
        g.set_result(tb, 1 + i, i2).unwrap();
        g.set_result(tb, 1 + acc, acc2).unwrap();
        g.set_result(body, 0, Origin::Out(t, acc as u32)).unwrap();
        g.set_result(body, 1, Origin::Arg(body, 1)).unwrap();
        g.set_result(body, 2, Origin::Arg(body, 2)).unwrap();
        g.add_export("sum", Origin::Out(lam, 0)).unwrap();
        g
    }

    #[test]
    fn theta_loop() {
        let g = sum_graph();
        assert!(crate::graph::validate(&g).is_empty(), "{:?}", crate::graph::validate(&g));
        let r = eval_rvsdg(&g, "sum", &[Value::i64(5)], DEFAULT_FUEL).unwrap();
        assert_eq!(r.result, Some(Value::i64(10)));
        let r = eval_rvsdg(&g, "sum", &[Value::i64(-3)], DEFAULT_FUEL).unwrap();
        assert_eq!(r.result, Some(Value::i64(0)));
    }

    #[test]
    fn missing_export() {
        let g = sum_graph();
        assert_eq!(eval_rvsdg(&g, "nope", &[], 100), Err(Trap::Unresolved("nope".into())));
    }
}
