//! Graph data model: regions, nodes, typed ports and the editing primitives
//! every pass is built from.
//!
//! Edges are stored twice: each input/result holds its origin, and each
//! output/argument keeps the list of its users. All editing goes through
//! methods on [`Graph`] that keep both sides in sync.

pub mod copy;
pub mod dot;
pub mod dump;
pub mod ops;
pub mod topo;
pub mod validate;
pub mod views;

use crate::types::{FnSig, Type};
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

pub use ops::{BinOp, CmpOp, Lit, MatchTable, Op};
pub use topo::topological_order;
pub use validate::{validate, Violation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// Producer side of an edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    Arg(RegionId, u32),
    Out(NodeId, u32),
}

/// Consumer side of an edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum User {
    In(NodeId, u32),
    Res(RegionId, u32),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Arg(r, i) => write!(f, "{r}.a{i}"),
            Origin::Out(n, i) => write!(f, "{n}.{i}"),
        }
    }
}

impl fmt::Display for User {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            User::In(n, i) => write!(f, "{n}.i{i}"),
            User::Res(r, i) => write!(f, "{r}.r{i}"),
        }
    }
}

/// An output or region argument.
#[derive(Clone, Debug)]
pub struct Port {
    pub ty: Type,
    pub users: Vec<User>,
}

/// An input or region result. Results may be left unset while a
/// structural node is under construction.
#[derive(Clone, Debug)]
pub struct Sink {
    pub ty: Type,
    pub origin: Option<Origin>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Simple(Op),
    Gamma,
    Theta,
    Lambda { name: String, sig: Arc<FnSig> },
    Delta { name: String, ty: Type },
    Phi,
}

impl NodeKind {
    pub fn name(&self) -> String {
        match self {
            NodeKind::Simple(op) => op.name(),
            NodeKind::Gamma => "gamma".into(),
            NodeKind::Theta => "theta".into(),
            NodeKind::Lambda { .. } => "lambda".into(),
            NodeKind::Delta { .. } => "delta".into(),
            NodeKind::Phi => "phi".into(),
        }
    }

    pub fn op(&self) -> Option<&Op> {
        match self {
            NodeKind::Simple(op) => Some(op),
            _ => None,
        }
    }

    pub fn is_structural(&self) -> bool {
        !matches!(self, NodeKind::Simple(_))
    }

    /// λ/δ/φ: nodes whose inputs are all context variables.
    pub fn has_context_vars(&self) -> bool {
        matches!(self, NodeKind::Lambda { .. } | NodeKind::Delta { .. } | NodeKind::Phi)
    }
}

#[derive(Clone, Debug)]
pub struct Node {
    pub parent: RegionId,
    pub kind: NodeKind,
    pub inputs: Vec<Sink>,
    pub outputs: Vec<Port>,
    pub regions: Vec<RegionId>,
}

#[derive(Clone, Debug)]
pub struct Region {
    /// Owning structural node and subregion index; `None` for the root.
    pub owner: Option<(NodeId, u32)>,
    pub args: Vec<Port>,
    pub results: Vec<Sink>,
    pub nodes: BTreeSet<NodeId>,
}

/// Name and source-level type of a root-region argument.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Import {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EditError {
    #[error("type mismatch: expected {expected}, found {found}")]
    TypeMismatch { expected: Type, found: Type },
    #[error("origin {origin} is not in region {region}")]
    CrossRegion { origin: Origin, region: RegionId },
    #[error("{0} still has users")]
    HasUsers(String),
    #[error("wrong arity: expected {expected}, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("{0}")]
    Invalid(String),
}

pub type EditResult<T> = Result<T, EditError>;

/// A translation unit: the root region with its imports and exports.
#[derive(Clone, Debug)]
pub struct Graph {
    nodes: Vec<Option<Node>>,
    regions: Vec<Option<Region>>,
    root: RegionId,
    /// Parallel to the root region's arguments.
    pub imports: Vec<Import>,
    /// Parallel to the root region's results.
    pub exports: Vec<String>,
}

impl Default for Graph {
    fn default() -> Self {
        Graph::new()
    }
}

impl Graph {
    pub fn new() -> Graph {
        let mut g = Graph { nodes: Vec::new(), regions: Vec::new(), root: RegionId(0), imports: Vec::new(), exports: Vec::new() };
        g.root = g.create_region(None);
        g
    }

    pub fn root(&self) -> RegionId {
        self.root
    }

    // ----- lookup -----

    pub fn node(&self, n: NodeId) -> &Node {
        self.nodes[n.0 as usize].as_ref().unwrap_or_else(|| panic!("dangling node {n}"))
    }

    fn node_mut(&mut self, n: NodeId) -> &mut Node {
        self.nodes[n.0 as usize].as_mut().unwrap_or_else(|| panic!("dangling node {n}"))
    }

    pub fn region(&self, r: RegionId) -> &Region {
        self.regions[r.0 as usize].as_ref().unwrap_or_else(|| panic!("dangling region {r}"))
    }

    fn region_mut(&mut self, r: RegionId) -> &mut Region {
        self.regions[r.0 as usize].as_mut().unwrap_or_else(|| panic!("dangling region {r}"))
    }

    pub fn has_node(&self, n: NodeId) -> bool {
        self.nodes.get(n.0 as usize).is_some_and(Option::is_some)
    }

    pub fn has_region(&self, r: RegionId) -> bool {
        self.regions.get(r.0 as usize).is_some_and(Option::is_some)
    }

    pub fn kind(&self, n: NodeId) -> &NodeKind {
        &self.node(n).kind
    }

    pub fn op(&self, n: NodeId) -> Option<&Op> {
        self.node(n).kind.op()
    }

    /// All live node ids in ascending order.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().enumerate().filter(|(_, n)| n.is_some()).map(|(i, _)| NodeId(i as u32))
    }

    pub fn region_ids(&self) -> impl Iterator<Item = RegionId> + '_ {
        self.regions.iter().enumerate().filter(|(_, r)| r.is_some()).map(|(i, _)| RegionId(i as u32))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_some()).count()
    }

    /// Upper bound on node ids (for dense side tables).
    pub fn node_capacity(&self) -> usize {
        self.nodes.len()
    }

    pub fn region_capacity(&self) -> usize {
        self.regions.len()
    }

    pub fn nodes_in(&self, r: RegionId) -> Vec<NodeId> {
        self.region(r).nodes.iter().copied().collect()
    }

    pub fn origin_ty(&self, o: Origin) -> &Type {
        match o {
            Origin::Arg(r, i) => &self.region(r).args[i as usize].ty,
            Origin::Out(n, i) => &self.node(n).outputs[i as usize].ty,
        }
    }

    pub fn origin_region(&self, o: Origin) -> RegionId {
        match o {
            Origin::Arg(r, _) => r,
            Origin::Out(n, _) => self.node(n).parent,
        }
    }

    pub fn users(&self, o: Origin) -> &[User] {
        match o {
            Origin::Arg(r, i) => &self.region(r).args[i as usize].users,
            Origin::Out(n, i) => &self.node(n).outputs[i as usize].users,
        }
    }

    fn users_mut(&mut self, o: Origin) -> &mut Vec<User> {
        match o {
            Origin::Arg(r, i) => &mut self.region_mut(r).args[i as usize].users,
            Origin::Out(n, i) => &mut self.node_mut(n).outputs[i as usize].users,
        }
    }

    fn sink(&self, u: User) -> &Sink {
        match u {
            User::In(n, i) => &self.node(n).inputs[i as usize],
            User::Res(r, i) => &self.region(r).results[i as usize],
        }
    }

    fn sink_mut(&mut self, u: User) -> &mut Sink {
        match u {
            User::In(n, i) => &mut self.node_mut(n).inputs[i as usize],
            User::Res(r, i) => &mut self.region_mut(r).results[i as usize],
        }
    }

    pub fn user_origin(&self, u: User) -> Option<Origin> {
        self.sink(u).origin
    }

    pub fn user_ty(&self, u: User) -> &Type {
        &self.sink(u).ty
    }

    pub fn user_region(&self, u: User) -> RegionId {
        match u {
            User::In(n, _) => self.node(n).parent,
            User::Res(r, _) => r,
        }
    }

    /// Origin of input `i` of `n`.
    pub fn input(&self, n: NodeId, i: usize) -> Origin {
        self.node(n).inputs[i].origin.expect("input without origin")
    }

    pub fn inputs(&self, n: NodeId) -> Vec<Origin> {
        self.node(n).inputs.iter().map(|s| s.origin.expect("input without origin")).collect()
    }

    pub fn result(&self, r: RegionId, i: usize) -> Option<Origin> {
        self.region(r).results[i].origin
    }

    pub fn num_outputs(&self, n: NodeId) -> usize {
        self.node(n).outputs.len()
    }

    pub fn num_inputs(&self, n: NodeId) -> usize {
        self.node(n).inputs.len()
    }

    pub fn subregions(&self, n: NodeId) -> &[RegionId] {
        &self.node(n).regions
    }

    pub fn owner(&self, r: RegionId) -> Option<(NodeId, u32)> {
        self.region(r).owner
    }

    pub fn parent(&self, n: NodeId) -> RegionId {
        self.node(n).parent
    }

    /// Whether `inner` is `outer` or nested somewhere inside it.
    pub fn region_within(&self, inner: RegionId, outer: RegionId) -> bool {
        let mut r = inner;
        loop {
            if r == outer {
                return true;
            }
            match self.owner(r) {
                Some((n, _)) => r = self.parent(n),
                None => return false,
            }
        }
    }

    /// Nesting depth: the root has depth 0.
    pub fn region_depth(&self, r: RegionId) -> usize {
        let mut d = 0;
        let mut r = r;
        while let Some((n, _)) = self.owner(r) {
            r = self.parent(n);
            d += 1;
        }
        d
    }

    /// Node producing `o`, if it is an output.
    pub fn producer(o: Origin) -> Option<NodeId> {
        match o {
            Origin::Out(n, _) => Some(n),
            Origin::Arg(..) => None,
        }
    }

    /// All nodes in `r` and in its nested regions.
    pub fn nodes_deep(&self, r: RegionId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![r];
        while let Some(r) = stack.pop() {
            for &n in &self.region(r).nodes {
                out.push(n);
                stack.extend(self.node(n).regions.iter().copied());
            }
        }
        out.sort();
        out
    }

    // ----- low-level edge maintenance -----

    fn attach(&mut self, o: Origin, u: User) {
        self.users_mut(o).push(u);
    }

    fn detach(&mut self, o: Origin, u: User) {
        let users = self.users_mut(o);
        if let Some(p) = users.iter().position(|x| *x == u) {
            users.remove(p);
        }
    }

    fn rename_user(&mut self, o: Origin, from: User, to: User) {
        for x in self.users_mut(o).iter_mut() {
            if *x == from {
                *x = to;
                return;
            }
        }
    }

    fn check_origin(&self, o: Origin, region: RegionId, ty: &Type) -> EditResult<()> {
        let valid = match o {
            Origin::Arg(r, i) => self.has_region(r) && (i as usize) < self.region(r).args.len(),
            Origin::Out(n, i) => self.has_node(n) && (i as usize) < self.node(n).outputs.len(),
        };
        if !valid {
            return Err(EditError::Invalid(format!("dangling origin {o}")));
        }
        if self.origin_region(o) != region {
            return Err(EditError::CrossRegion { origin: o, region });
        }
        let found = self.origin_ty(o);
        if found != ty {
            return Err(EditError::TypeMismatch { expected: ty.clone(), found: found.clone() });
        }
        Ok(())
    }

    /// Point `u` at `o`.
    pub fn set_origin(&mut self, u: User, o: Origin) -> EditResult<()> {
        let region = self.user_region(u);
        let ty = self.user_ty(u).clone();
        self.check_origin(o, region, &ty)?;
        if let Some(old) = self.sink(u).origin {
            self.detach(old, u);
        }
        self.sink_mut(u).origin = Some(o);
        self.attach(o, u);
        Ok(())
    }

    pub fn set_result(&mut self, r: RegionId, i: usize, o: Origin) -> EditResult<()> {
        self.set_origin(User::Res(r, i as u32), o)
    }

    /// Leave result `i` of `r` without an origin.
    pub fn clear_result(&mut self, r: RegionId, i: usize) {
        let u = User::Res(r, i as u32);
        if let Some(old) = self.sink(u).origin {
            self.detach(old, u);
        }
        self.sink_mut(u).origin = None;
    }

    /// Redirect every user of `old` to `new`; returns the number of users moved.
    pub fn divert_users(&mut self, old: Origin, new: Origin) -> EditResult<usize> {
        if old == new {
            return Ok(0);
        }
        let region = self.origin_region(old);
        let ty = self.origin_ty(old).clone();
        self.check_origin(new, region, &ty)?;
        let users = std::mem::take(self.users_mut(old));
        let count = users.len();
        for &u in &users {
            self.sink_mut(u).origin = Some(new);
        }
        self.users_mut(new).extend(users);
        Ok(count)
    }

    // ----- creation -----

    fn create_region(&mut self, owner: Option<(NodeId, u32)>) -> RegionId {
        let id = RegionId(self.regions.len() as u32);
        self.regions.push(Some(Region { owner, args: Vec::new(), results: Vec::new(), nodes: BTreeSet::new() }));
        id
    }

    fn new_node(&mut self, region: RegionId, kind: NodeKind, inputs: &[(Type, Origin)], outputs: Vec<Type>) -> EditResult<NodeId> {
        for (ty, o) in inputs {
            self.check_origin(*o, region, ty)?;
        }
        let id = NodeId(self.nodes.len() as u32);
        let node = Node {
            parent: region,
            kind,
            inputs: inputs.iter().map(|(ty, o)| Sink { ty: ty.clone(), origin: Some(*o) }).collect(),
            outputs: outputs.into_iter().map(|ty| Port { ty, users: Vec::new() }).collect(),
            regions: Vec::new(),
        };
        self.nodes.push(Some(node));
        for (i, (_, o)) in inputs.iter().enumerate() {
            self.attach(*o, User::In(id, i as u32));
        }
        self.region_mut(region).nodes.insert(id);
        Ok(id)
    }

    fn add_subregion(&mut self, n: NodeId) -> RegionId {
        let idx = self.node(n).regions.len() as u32;
        let r = self.create_region(Some((n, idx)));
        self.node_mut(n).regions.push(r);
        r
    }

    /// Add a simple node computing `op` over `inputs`.
    pub fn add_simple(&mut self, region: RegionId, op: Op, inputs: &[Origin]) -> EditResult<NodeId> {
        let tys = op.input_types();
        if tys.len() != inputs.len() {
            return Err(EditError::Arity { expected: tys.len(), found: inputs.len() });
        }
        let outs = op.output_types();
        let ins: Vec<(Type, Origin)> = tys.into_iter().zip(inputs.iter().copied()).collect();
        self.new_node(region, NodeKind::Simple(op), &ins, outs)
    }

    /// Convenience: simple node with a single output, returning that output.
    pub fn simple_out(&mut self, region: RegionId, op: Op, inputs: &[Origin]) -> EditResult<Origin> {
        Ok(Origin::Out(self.add_simple(region, op, inputs)?, 0))
    }

    pub fn add_const(&mut self, region: RegionId, lit: Lit) -> Origin {
        self.simple_out(region, Op::Const(lit), &[]).expect("constant creation")
    }

    /// Begin a γ-node with `k` subregions selected by `pred`.
    pub fn add_gamma(&mut self, region: RegionId, pred: Origin, k: u32) -> EditResult<NodeId> {
        if k < 2 {
            return Err(EditError::Invalid(format!("gamma needs at least 2 regions, got {k}")));
        }
        let n = self.new_node(region, NodeKind::Gamma, &[(Type::Ctl(k), pred)], vec![])?;
        for _ in 0..k {
            self.add_subregion(n);
        }
        Ok(n)
    }

    /// Add an entry variable; returns its index `l` (input `l+1`, argument `l`).
    pub fn add_entry_var(&mut self, g: NodeId, origin: Origin) -> EditResult<usize> {
        self.expect_kind(g, &NodeKind::Gamma)?;
        let ty = self.origin_ty(origin).clone();
        let region = self.parent(g);
        self.check_origin(origin, region, &ty)?;
        let idx = self.node(g).inputs.len();
        self.insert_input(g, idx, ty.clone(), origin);
        for r in self.node(g).regions.clone() {
            let a = self.region(r).args.len();
            self.insert_arg(r, a, ty.clone());
        }
        Ok(idx - 1)
    }

    /// Add an exit variable with one result origin per subregion.
    pub fn add_exit_var(&mut self, g: NodeId, origins: &[Origin]) -> EditResult<usize> {
        self.expect_kind(g, &NodeKind::Gamma)?;
        let regions = self.node(g).regions.clone();
        if origins.len() != regions.len() {
            return Err(EditError::Arity { expected: regions.len(), found: origins.len() });
        }
        let ty = self.origin_ty(origins[0]).clone();
        for (r, o) in regions.iter().zip(origins) {
            self.check_origin(*o, *r, &ty)?;
        }
        for (r, o) in regions.iter().zip(origins) {
            let i = self.region(*r).results.len();
            self.insert_result(*r, i, ty.clone(), Some(*o));
        }
        let l = self.node(g).outputs.len();
        self.insert_output(g, l, ty);
        Ok(l)
    }

    /// Begin a θ-node; result 0 (the predicate) is unset until [`Graph::set_result`].
    pub fn add_theta(&mut self, region: RegionId) -> NodeId {
        let n = self.new_node(region, NodeKind::Theta, &[], vec![]).expect("theta creation");
        let r = self.add_subregion(n);
        self.insert_result(r, 0, Type::Ctl(2), None);
        n
    }

    /// Add a loop variable whose result initially passes the argument through.
    pub fn add_loop_var(&mut self, t: NodeId, origin: Origin) -> EditResult<usize> {
        self.expect_kind(t, &NodeKind::Theta)?;
        let ty = self.origin_ty(origin).clone();
        let region = self.parent(t);
        self.check_origin(origin, region, &ty)?;
        let l = self.node(t).inputs.len();
        let body = self.node(t).regions[0];
        self.insert_input(t, l, ty.clone(), origin);
        self.insert_output(t, l, ty.clone());
        self.insert_arg(body, l, ty.clone());
        self.insert_result(body, l + 1, ty, Some(Origin::Arg(body, l as u32)));
        Ok(l)
    }

    /// Begin a λ-node for the lowered signature `sig`.
    pub fn add_lambda(&mut self, region: RegionId, name: &str, sig: FnSig) -> NodeId {
        let sig = Arc::new(sig);
        let n = self
            .new_node(region, NodeKind::Lambda { name: name.to_string(), sig: sig.clone() }, &[], vec![Type::Fn(sig.clone())])
            .expect("lambda creation");
        let r = self.add_subregion(n);
        for (i, p) in sig.params.iter().enumerate() {
            self.insert_arg(r, i, p.clone());
        }
        for (i, t) in sig.results.iter().enumerate() {
            self.insert_result(r, i, t.clone(), None);
        }
        n
    }

    /// Begin a δ-node computing a value of type `ty`; its output is the address.
    pub fn add_delta(&mut self, region: RegionId, name: &str, ty: Type) -> NodeId {
        let n = self
            .new_node(region, NodeKind::Delta { name: name.to_string(), ty: ty.clone() }, &[], vec![Type::Ptr])
            .expect("delta creation");
        let r = self.add_subregion(n);
        self.insert_result(r, 0, ty, None);
        n
    }

    pub fn add_phi(&mut self, region: RegionId) -> NodeId {
        let n = self.new_node(region, NodeKind::Phi, &[], vec![]).expect("phi creation");
        self.add_subregion(n);
        n
    }

    /// Add a context variable to a λ/δ/φ node; returns `l` (input `l`, argument `l`).
    pub fn add_context_var(&mut self, n: NodeId, origin: Origin) -> EditResult<usize> {
        if !self.kind(n).has_context_vars() {
            return Err(EditError::Invalid(format!("{n} has no context variables")));
        }
        let ty = self.origin_ty(origin).clone();
        let region = self.parent(n);
        self.check_origin(origin, region, &ty)?;
        let l = self.node(n).inputs.len();
        let body = self.node(n).regions[0];
        self.insert_input(n, l, ty.clone(), origin);
        self.insert_arg(body, l, ty);
        Ok(l)
    }

    /// Add a recursion variable to a φ-node; returns `l`.
    pub fn add_recursion_var(&mut self, p: NodeId, ty: Type) -> EditResult<usize> {
        self.expect_kind(p, &NodeKind::Phi)?;
        let body = self.node(p).regions[0];
        let l = self.node(p).outputs.len();
        self.insert_output(p, l, ty.clone());
        let a = self.region(body).args.len();
        self.insert_arg(body, a, ty.clone());
        self.insert_result(body, l, ty, None);
        Ok(l)
    }

    /// Add a root argument naming an external entity.
    pub fn add_import(&mut self, name: &str, source_ty: Type) -> Origin {
        let ty = match &source_ty {
            Type::Fn(_) => source_ty.lower(),
            _ => Type::Ptr,
        };
        let root = self.root;
        let i = self.region(root).args.len();
        self.insert_arg(root, i, ty);
        self.imports.push(Import { name: name.to_string(), ty: source_ty });
        Origin::Arg(root, i as u32)
    }

    /// Add a root result exporting `origin` under `name`.
    pub fn add_export(&mut self, name: &str, origin: Origin) -> EditResult<()> {
        let root = self.root;
        let ty = self.origin_ty(origin).clone();
        self.check_origin(origin, root, &ty)?;
        let i = self.region(root).results.len();
        self.insert_result(root, i, ty, Some(origin));
        self.exports.push(name.to_string());
        Ok(())
    }

    fn expect_kind(&self, n: NodeId, kind: &NodeKind) -> EditResult<()> {
        if std::mem::discriminant(self.kind(n)) != std::mem::discriminant(kind) {
            return Err(EditError::Invalid(format!("{n} is a {}, expected {}", self.kind(n).name(), kind.name())));
        }
        Ok(())
    }

    // ----- port insertion/removal with reindexing -----

    fn insert_input(&mut self, n: NodeId, idx: usize, ty: Type, origin: Origin) {
        let len = self.node(n).inputs.len();
        for j in (idx..len).rev() {
            if let Some(o) = self.node(n).inputs[j].origin {
                self.rename_user(o, User::In(n, j as u32), User::In(n, j as u32 + 1));
            }
        }
        self.node_mut(n).inputs.insert(idx, Sink { ty, origin: Some(origin) });
        self.attach(origin, User::In(n, idx as u32));
    }

    fn remove_input(&mut self, n: NodeId, idx: usize) {
        if let Some(o) = self.node(n).inputs[idx].origin {
            self.detach(o, User::In(n, idx as u32));
        }
        self.node_mut(n).inputs.remove(idx);
        let len = self.node(n).inputs.len();
        for j in idx..len {
            if let Some(o) = self.node(n).inputs[j].origin {
                self.rename_user(o, User::In(n, j as u32 + 1), User::In(n, j as u32));
            }
        }
    }

    fn insert_output(&mut self, n: NodeId, idx: usize, ty: Type) {
        self.node_mut(n).outputs.insert(idx, Port { ty, users: Vec::new() });
        self.reindex_output_users(n, idx + 1);
    }

    fn remove_output(&mut self, n: NodeId, idx: usize) -> EditResult<()> {
        if !self.node(n).outputs[idx].users.is_empty() {
            return Err(EditError::HasUsers(format!("{n}.{idx}")));
        }
        self.node_mut(n).outputs.remove(idx);
        self.reindex_output_users(n, idx);
        Ok(())
    }

    fn reindex_output_users(&mut self, n: NodeId, from: usize) {
        for j in from..self.node(n).outputs.len() {
            for u in self.node(n).outputs[j].users.clone() {
                self.sink_mut(u).origin = Some(Origin::Out(n, j as u32));
            }
        }
    }

    fn insert_arg(&mut self, r: RegionId, idx: usize, ty: Type) {
        self.region_mut(r).args.insert(idx, Port { ty, users: Vec::new() });
        self.reindex_arg_users(r, idx + 1);
    }

    fn remove_arg(&mut self, r: RegionId, idx: usize) -> EditResult<()> {
        if !self.region(r).args[idx].users.is_empty() {
            return Err(EditError::HasUsers(format!("{r}.a{idx}")));
        }
        self.region_mut(r).args.remove(idx);
        self.reindex_arg_users(r, idx);
        Ok(())
    }

    fn reindex_arg_users(&mut self, r: RegionId, from: usize) {
        for j in from..self.region(r).args.len() {
            for u in self.region(r).args[j].users.clone() {
                self.sink_mut(u).origin = Some(Origin::Arg(r, j as u32));
            }
        }
    }

    fn insert_result(&mut self, r: RegionId, idx: usize, ty: Type, origin: Option<Origin>) {
        let len = self.region(r).results.len();
        for j in (idx..len).rev() {
            if let Some(o) = self.region(r).results[j].origin {
                self.rename_user(o, User::Res(r, j as u32), User::Res(r, j as u32 + 1));
            }
        }
        self.region_mut(r).results.insert(idx, Sink { ty, origin });
        if let Some(o) = origin {
            self.attach(o, User::Res(r, idx as u32));
        }
    }

    fn remove_result(&mut self, r: RegionId, idx: usize) {
        if let Some(o) = self.region(r).results[idx].origin {
            self.detach(o, User::Res(r, idx as u32));
        }
        self.region_mut(r).results.remove(idx);
        let len = self.region(r).results.len();
        for j in idx..len {
            if let Some(o) = self.region(r).results[j].origin {
                self.rename_user(o, User::Res(r, j as u32 + 1), User::Res(r, j as u32));
            }
        }
    }

    // ----- removal -----

    /// Remove a node whose outputs have no users, together with its subregions.
    pub fn remove_node(&mut self, n: NodeId) -> EditResult<()> {
        if let Some(i) = self.node(n).outputs.iter().position(|p| !p.users.is_empty()) {
            return Err(EditError::HasUsers(format!("{n}.{i}")));
        }
        for i in (0..self.node(n).inputs.len()).rev() {
            if let Some(o) = self.node(n).inputs[i].origin {
                self.detach(o, User::In(n, i as u32));
            }
        }
        for r in self.node(n).regions.clone() {
            self.drop_region(r);
        }
        let parent = self.parent(n);
        self.region_mut(parent).nodes.remove(&n);
        self.nodes[n.0 as usize] = None;
        Ok(())
    }

    fn drop_region(&mut self, r: RegionId) {
        for n in self.region(r).nodes.clone() {
            for sub in self.node(n).regions.clone() {
                self.drop_region(sub);
            }
            self.nodes[n.0 as usize] = None;
        }
        self.regions[r.0 as usize] = None;
    }

    /// Remove entry variable `l` of a γ-node; its arguments must be unused.
    pub fn remove_entry_var(&mut self, g: NodeId, l: usize) -> EditResult<()> {
        self.expect_kind(g, &NodeKind::Gamma)?;
        let regions = self.node(g).regions.clone();
        for &r in &regions {
            if !self.region(r).args[l].users.is_empty() {
                return Err(EditError::HasUsers(format!("{r}.a{l}")));
            }
        }
        for &r in &regions {
            self.remove_arg(r, l)?;
        }
        self.remove_input(g, l + 1);
        Ok(())
    }

    /// Remove exit variable `l` of a γ-node; its output must be unused.
    pub fn remove_exit_var(&mut self, g: NodeId, l: usize) -> EditResult<()> {
        self.expect_kind(g, &NodeKind::Gamma)?;
        self.remove_output(g, l)?;
        for r in self.node(g).regions.clone() {
            self.remove_result(r, l);
        }
        Ok(())
    }

    /// Remove loop variable `l` of a θ-node. The output must be unused and
    /// the argument may only feed its own result.
    pub fn remove_loop_var(&mut self, t: NodeId, l: usize) -> EditResult<()> {
        self.expect_kind(t, &NodeKind::Theta)?;
        let body = self.node(t).regions[0];
        let own = User::Res(body, l as u32 + 1);
        if self.region(body).args[l].users.iter().any(|u| *u != own) {
            return Err(EditError::HasUsers(format!("{body}.a{l}")));
        }
        if !self.node(t).outputs[l].users.is_empty() {
            return Err(EditError::HasUsers(format!("{t}.{l}")));
        }
        self.remove_result(body, l + 1);
        self.remove_arg(body, l)?;
        self.remove_output(t, l)?;
        self.remove_input(t, l);
        Ok(())
    }

    /// Remove context variable `l` of a λ/δ/φ node; its argument must be unused.
    pub fn remove_context_var(&mut self, n: NodeId, l: usize) -> EditResult<()> {
        if !self.kind(n).has_context_vars() {
            return Err(EditError::Invalid(format!("{n} has no context variables")));
        }
        let body = self.node(n).regions[0];
        self.remove_arg(body, l)?;
        self.remove_input(n, l);
        Ok(())
    }

    /// Remove recursion variable `l` of a φ-node. Output and argument must be unused.
    pub fn remove_recursion_var(&mut self, p: NodeId, l: usize) -> EditResult<()> {
        self.expect_kind(p, &NodeKind::Phi)?;
        let body = self.node(p).regions[0];
        let a = self.node(p).inputs.len() + l;
        if !self.region(body).args[a].users.is_empty() {
            return Err(EditError::HasUsers(format!("{body}.a{a}")));
        }
        self.remove_output(p, l)?;
        self.remove_result(body, l);
        self.remove_arg(body, a)?;
        Ok(())
    }

    /// Remove an unused root argument and its import record.
    pub fn remove_import(&mut self, i: usize) -> EditResult<()> {
        let root = self.root;
        self.remove_arg(root, i)?;
        self.imports.remove(i);
        Ok(())
    }

    pub fn remove_export(&mut self, i: usize) {
        let root = self.root;
        self.remove_result(root, i);
        self.exports.remove(i);
    }

    /// Origin exported under `name`.
    pub fn export_origin(&self, name: &str) -> Option<Origin> {
        let i = self.exports.iter().position(|e| e == name)?;
        self.result(self.root, i)
    }

    /// Remove nodes in `r` (not nested) that have no users, repeatedly.
    pub fn prune_unused(&mut self, r: RegionId) {
        loop {
            let dead: Vec<NodeId> =
                self.region(r).nodes.iter().copied().filter(|&n| self.node(n).outputs.iter().all(|p| p.users.is_empty())).collect();
            if dead.is_empty() {
                return;
            }
            for n in dead.into_iter().rev() {
                self.remove_node(n).expect("node without users");
            }
        }
    }
}
