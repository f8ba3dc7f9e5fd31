//! Module-level construction: one λ/δ per definition, φ-nodes for mutually
//! recursive groups, imports for externals and exports for exported names.

use super::translate::{SymbolTable, Translator};
use super::{prepare_body, ConstructError, FunctionStats};
use crate::graph::{Graph, NodeId, Origin, RegionId};
use crate::source::ipg::referenced_symbols;
use crate::source::{compute_ipg, Cfg, Module, IO_VAR, MEM_VAR};
use crate::types::{FnSig, Type};
use petgraph::algo::tarjan_scc;
use std::collections::{BTreeMap, BTreeSet};

enum Def<'m> {
    Function(&'m crate::source::Function),
    Global(&'m crate::source::Global),
}

impl Def<'_> {
    fn body(&self) -> Option<&Cfg> {
        match self {
            Def::Function(f) => f.body.as_ref(),
            Def::Global(g) => g.init.as_ref(),
        }
    }

    /// Type of the symbol's value in the graph.
    fn graph_type(&self) -> Type {
        match self {
            Def::Function(f) => f.fn_type().lower(),
            Def::Global(_) => Type::Ptr,
        }
    }
}

fn variable_types(params: &[(String, Type)], cfg: &Cfg) -> BTreeMap<String, Type> {
    let mut types: BTreeMap<String, Type> = params.iter().cloned().collect();
    for b in &cfg.blocks {
        for i in &b.insts {
            if let (Some(d), Some(t)) = (&i.dst, i.kind.result_type()) {
                types.insert(d.clone(), t);
            }
        }
    }
    types
}

struct Builder {
    stats: Vec<FunctionStats>,
}

impl Builder {
    /// Create the λ or δ for `def` in `region`, with context variables for
    /// every referenced symbol bound through `scope`.
    fn definition(
        &mut self,
        g: &mut Graph,
        region: RegionId,
        def: &Def<'_>,
        scope: &BTreeMap<String, Origin>,
    ) -> Result<NodeId, ConstructError> {
        let cfg = def.body().expect("definition has a body");
        let (name, params, stateless) = match def {
            Def::Function(f) => (f.name.as_str(), f.params.clone(), false),
            Def::Global(gl) => (gl.name.as_str(), Vec::new(), true),
        };
        let node = match def {
            Def::Function(f) => g.add_lambda(
                region,
                name,
                FnSig { params: f.params.iter().map(|p| p.1.clone()).collect(), results: f.ret.iter().cloned().collect() }.lower(),
            ),
            Def::Global(gl) => g.add_delta(region, name, gl.ty.clone()),
        };
        let body = g.subregions(node)[0];
        let mut symtab = SymbolTable::new();
        for (i, s) in referenced_symbols(cfg).into_iter().enumerate() {
            let o = *scope.get(&s).ok_or_else(|| ConstructError::Missing { func: name.into(), var: format!("@{s}") })?;
            g.add_context_var(node, o).map_err(|e| ConstructError::Graph { func: name.into(), msg: e.to_string() })?;
            symtab.insert(format!("@{s}"), Origin::Arg(body, i as u32));
        }
        let cv = symtab.len();
        for (j, (p, _)) in params.iter().enumerate() {
            symtab.insert(p.clone(), Origin::Arg(body, (cv + j) as u32));
        }
        if !stateless {
            symtab.insert(MEM_VAR.into(), Origin::Arg(body, (cv + params.len()) as u32));
            symtab.insert(IO_VAR.into(), Origin::Arg(body, (cv + params.len() + 1) as u32));
        }
        let ret = match def {
            Def::Function(f) => f.ret.clone(),
            Def::Global(gl) => Some(gl.ty.clone()),
        };
        let (restructured, tree, mut st) = prepare_body(name, ret.as_ref(), cfg, stateless)?;
        let types = variable_types(&params, &restructured);
        let mut tr = Translator::new(g, &restructured, name, &types, stateless, body, symtab);
        tr.seed_undefined(body, &tree.demand)?;
        tr.translate(body, &tree)?;
        st.nodes = g.nodes_deep(body).len();
        self.stats.push(st);
        Ok(node)
    }
}

/// Build the graph of a valid module.
pub fn inter_procedural(m: &Module) -> Result<(Graph, Vec<FunctionStats>), ConstructError> {
    let ipg = compute_ipg(m);
    let defs: Vec<Def> = m.globals.iter().map(Def::Global).chain(m.functions.iter().map(Def::Function)).collect();
    let pg = ipg.to_petgraph();
    let mut g = Graph::new();
    let root = g.root();
    let mut b = Builder { stats: Vec::new() };
    let mut outer: BTreeMap<String, Origin> = BTreeMap::new();
    // Tarjan yields components callee-first, so every referenced symbol
    // already has an origin when a component is processed.
    for scc in tarjan_scc(&pg) {
        let mut members: Vec<usize> = scc.iter().map(|n| pg[*n]).collect();
        members.sort_by(|a, b| ipg.names[*a].cmp(&ipg.names[*b]));
        let recursive = members.len() > 1 || ipg.edges.contains(&(members[0], members[0]));
        if !recursive {
            let i = members[0];
            let def = &defs[i];
            let name = ipg.names[i].clone();
            let o = match (def, def.body()) {
                (Def::Function(f), None) => g.add_import(&name, f.fn_type()),
                (Def::Global(gl), None) => g.add_import(&name, gl.ty.clone()),
                _ => Origin::Out(b.definition(&mut g, root, def, &outer)?, 0),
            };
            outer.insert(name, o);
            continue;
        }
        let phi = g.add_phi(root);
        let body = g.subregions(phi)[0];
        let names: BTreeSet<&str> = members.iter().map(|&i| ipg.names[i].as_str()).collect();
        let mut external: BTreeSet<String> = BTreeSet::new();
        for &i in &members {
            external.extend(referenced_symbols(defs[i].body().unwrap()).into_iter().filter(|s| !names.contains(s.as_str())));
        }
        let mut scope = BTreeMap::new();
        for s in &external {
            let l = g.add_context_var(phi, outer[s]).map_err(|e| ConstructError::Graph { func: s.clone(), msg: e.to_string() })?;
            scope.insert(s.clone(), Origin::Arg(body, l as u32));
        }
        let mut rvs = Vec::new();
        for &i in &members {
            let l = g
                .add_recursion_var(phi, defs[i].graph_type())
                .map_err(|e| ConstructError::Graph { func: ipg.names[i].clone(), msg: e.to_string() })?;
            let cv = external.len();
            scope.insert(ipg.names[i].clone(), Origin::Arg(body, (cv + l) as u32));
            rvs.push(l);
        }
        for (&i, &l) in members.iter().zip(&rvs) {
            let n = b.definition(&mut g, body, &defs[i], &scope)?;
            g.set_result(body, l, Origin::Out(n, 0))
                .map_err(|e| ConstructError::Graph { func: ipg.names[i].clone(), msg: e.to_string() })?;
            outer.insert(ipg.names[i].clone(), Origin::Out(phi, l as u32));
        }
    }
    let exported =
        m.globals.iter().filter(|x| x.exported).map(|x| &x.name).chain(m.functions.iter().filter(|f| f.exported).map(|f| &f.name));
    for name in exported {
        g.add_export(name, outer[name]).map_err(|e| ConstructError::Graph { func: name.clone(), msg: e.to_string() })?;
    }
    Ok((g, b.stats))
}
