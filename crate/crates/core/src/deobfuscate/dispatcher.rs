//! Recognize flattening dispatchers and recover their state transition graph.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::cfg::{Digraph, Guard};
use crate::frontend::{BinOp, Block, Expr, ExprKind, FunctionDecl, LValue, NodeId, Program, Stmt, StmtKind};

use super::DeobError;

/// A dispatcher loop found at the top level of a function body.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatcherInfo {
    pub function: String,
    /// Position of the loop among the function's top-level statements.
    pub loop_index: usize,
    pub loop_id: NodeId,
    pub state_var: String,
    pub exit_label: i64,
    /// Arms in source order: tested label and arm body.
    pub arms: Vec<(i64, Block)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StateVarInfo {
    pub name: String,
    pub initial: i64,
    pub exit: i64,
}

/// How an arm picks the next state.
#[derive(Debug, Clone, PartialEq)]
pub enum Transition {
    Goto(i64),
    Branch { cond: Expr, on_true: i64, on_false: i64 },
    /// The arm never writes the state variable, so it runs again.
    Stay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateNode {
    pub label: i64,
    pub stmts: Vec<Stmt>,
    pub transition: Transition,
}

/// States in dispatcher arm order. Index `nodes.len()` stands for the exit sentinel.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGraph {
    pub nodes: Vec<StateNode>,
    pub initial: i64,
    pub exit: i64,
}

impl StateGraph {
    pub fn exit_index(&self) -> usize {
        self.nodes.len()
    }

    /// Node index of a label; the exit label maps to [`Self::exit_index`].
    pub fn index(&self, label: i64) -> Option<usize> {
        if label == self.exit {
            return Some(self.exit_index());
        }
        self.nodes.iter().position(|n| n.label == label)
    }

    pub fn successors(&self, i: usize) -> Vec<usize> {
        if i == self.exit_index() {
            return vec![];
        }
        let idx = |l: i64| self.index(l).expect("validated by build_state_graph");
        match &self.nodes[i].transition {
            Transition::Goto(t) => vec![idx(*t)],
            Transition::Branch { on_true, on_false, .. } => vec![idx(*on_true), idx(*on_false)],
            Transition::Stay => vec![i],
        }
    }

    /// Graph over node indices with the exit sentinel as the last node.
    pub fn digraph(&self) -> Digraph {
        let mut g = Digraph::new(self.nodes.len() + 1);
        for i in 0..self.nodes.len() {
            for s in self.successors(i) {
                g.add_edge(i, s);
            }
        }
        g
    }

    pub fn entry(&self) -> usize {
        self.index(self.initial).expect("validated by build_state_graph")
    }

    /// Labelled edges `(from, to, guard)`.
    pub fn edges(&self) -> Vec<(i64, i64, Guard)> {
        let mut out = Vec::new();
        for n in &self.nodes {
            for (to, guard) in transition_edges(n.label, &n.transition) {
                out.push((n.label, to, guard));
            }
        }
        out
    }
}

fn transition_edges(label: i64, t: &Transition) -> Vec<(i64, Guard)> {
    match t {
        Transition::Goto(k) => vec![(*k, Guard::Always)],
        Transition::Branch { cond, on_true, on_false } => {
            vec![(*on_true, Guard::True(cond.clone())), (*on_false, Guard::False(cond.clone()))]
        }
        Transition::Stay => vec![(label, Guard::Always)],
    }
}

/// `v op C` or `C op v` for a variable and a literal.
fn var_vs_const(e: &Expr, op: BinOp) -> Option<(&str, i64)> {
    match &e.kind {
        ExprKind::Binary(o, l, r) if *o == op => match (&l.kind, &r.kind) {
            (ExprKind::Var(v), ExprKind::Int(c)) | (ExprKind::Int(c), ExprKind::Var(v)) => Some((v, *c)),
            _ => None,
        },
        _ => None,
    }
}

fn writes(s: &Stmt, var: &str) -> bool {
    let mut found = false;
    s.walk(&mut |x| match &x.kind {
        StmtKind::Assign { target: LValue::Var(n), .. } | StmtKind::Decl { name: n, .. } if n == var => found = true,
        _ => {}
    });
    found
}

fn block_writes(b: &Block, var: &str) -> bool {
    b.stmts.iter().any(|s| writes(s, var))
}

/// Flatten an `if (v == L1) {..} else if (v == L2) {..} ...` chain with no final else.
fn arm_chain(s: &Stmt) -> Option<(String, Vec<(i64, Block)>)> {
    let mut var: Option<String> = None;
    let mut arms = Vec::new();
    let mut cur = s;
    loop {
        let StmtKind::If { cond, then_block, else_block } = &cur.kind else {
            return None;
        };
        let (v, label) = var_vs_const(cond, BinOp::Eq)?;
        match &var {
            None => var = Some(v.to_string()),
            Some(w) if w != v => return None,
            _ => {}
        }
        arms.push((label, then_block.clone()));
        match else_block {
            None => break,
            Some(b) if b.stmts.len() == 1 => cur = &b.stmts[0],
            Some(_) => return None,
        }
    }
    Some((var?, arms))
}

fn dispatcher_in(f: &FunctionDecl) -> Option<DispatcherInfo> {
    for (i, s) in f.body.stmts.iter().enumerate() {
        let StmtKind::While { cond, body } = &s.kind else { continue };
        let Some((sigma, exit)) = var_vs_const(cond, BinOp::Ne) else { continue };
        if body.stmts.len() != 1 {
            continue;
        }
        let Some((v, arms)) = arm_chain(&body.stmts[0]) else { continue };
        if v != sigma || arms.len() < 2 {
            continue;
        }
        let writing = arms.iter().filter(|(_, b)| block_writes(b, sigma)).count();
        if writing * 5 < arms.len() * 4 {
            continue;
        }
        return Some(DispatcherInfo {
            function: f.name.clone(),
            loop_index: i,
            loop_id: s.id,
            state_var: sigma.to_string(),
            exit_label: exit,
            arms,
        });
    }
    None
}

/// At most one dispatcher per function: a top-level `while (v != EXIT)` whose
/// body is a single equality chain on `v` with at least 80% of arms writing `v`.
pub fn detect_dispatcher(p: &Program) -> Vec<DispatcherInfo> {
    p.functions.iter().filter_map(dispatcher_in).collect()
}

/// Find the constant the state variable holds when the loop is entered.
pub fn extract_state_var(f: &FunctionDecl, d: &DispatcherInfo) -> Result<StateVarInfo, DeobError> {
    let sigma = d.state_var.as_str();
    let ambiguous = || DeobError::AmbiguousInit { function: d.function.clone(), var: sigma.to_string() };
    let mut value: Option<i64> = None;
    for s in &f.body.stmts[..d.loop_index] {
        match &s.kind {
            StmtKind::Decl { name, init } if name == sigma => {
                value = Some(match init {
                    None => 0,
                    Some(e) => e.as_int().ok_or_else(ambiguous)?,
                });
            }
            StmtKind::Assign { target: LValue::Var(name), value: e } if name == sigma => {
                value = Some(e.as_int().ok_or_else(ambiguous)?);
            }
            _ if writes(s, sigma) => return Err(ambiguous()),
            _ => {}
        }
    }
    let initial = value.ok_or_else(ambiguous)?;
    Ok(StateVarInfo { name: sigma.to_string(), initial, exit: d.exit_label })
}

fn split_arm(body: &Block, sigma: &str) -> Result<(Vec<Stmt>, Transition), String> {
    let mut stmts = body.stmts.clone();
    let transition = match stmts.last().map(|s| &s.kind) {
        Some(StmtKind::Assign { target: LValue::Var(n), value }) if n == sigma => {
            let k = value.as_int().ok_or_else(|| format!("{sigma} assigned a non-constant"))?;
            stmts.pop();
            Transition::Goto(k)
        }
        Some(StmtKind::If { cond, then_block, else_block: Some(else_block) })
            if then_block.stmts.len() == 1 && else_block.stmts.len() == 1 && !cond.mentions(sigma) =>
        {
            let target = |b: &Block| match &b.stmts[0].kind {
                StmtKind::Assign { target: LValue::Var(n), value } if n == sigma => Some(value.as_int()),
                _ => None,
            };
            match (target(then_block), target(else_block)) {
                (Some(Some(a)), Some(Some(b))) => {
                    let cond = cond.clone();
                    stmts.pop();
                    Transition::Branch { cond, on_true: a, on_false: b }
                }
                (Some(None), _) | (_, Some(None)) => return Err(format!("{sigma} assigned a non-constant")),
                _ => Transition::Stay,
            }
        }
        _ => Transition::Stay,
    };
    if stmts.iter().any(|s| s.mentions(sigma)) {
        return Err(format!("{sigma} used inside an arm body"));
    }
    Ok((stmts, transition))
}

/// Arm bodies with the trailing state update removed. Arms whose update is
/// not recognized are returned whole.
pub fn extract_cases(d: &DispatcherInfo) -> Vec<(i64, Vec<Stmt>)> {
    d.arms
        .iter()
        .map(|(label, body)| match split_arm(body, &d.state_var) {
            Ok((stmts, _)) => (*label, stmts),
            Err(_) => (*label, body.stmts.clone()),
        })
        .collect()
}

/// Successor states of one arm with their guards.
pub fn analyze_transitions(label: i64, arm: &Block, sigma: &str) -> Result<Vec<(i64, Guard)>, DeobError> {
    split_arm(arm, sigma)
        .map(|(_, t)| transition_edges(label, &t))
        .map_err(|reason| DeobError::UnresolvedTransition { label, reason })
}

pub fn build_state_graph(d: &DispatcherInfo, spec: &StateVarInfo) -> Result<StateGraph, DeobError> {
    let mut nodes = Vec::with_capacity(d.arms.len());
    let mut seen = BTreeSet::new();
    for (label, body) in &d.arms {
        if !seen.insert(*label) || *label == spec.exit {
            return Err(DeobError::UnresolvedTransition { label: *label, reason: "duplicate state label".into() });
        }
        let (stmts, transition) =
            split_arm(body, &spec.name).map_err(|reason| DeobError::UnresolvedTransition { label: *label, reason })?;
        nodes.push(StateNode { label: *label, stmts, transition });
    }
    let g = StateGraph { nodes, initial: spec.initial, exit: spec.exit };
    let known = |l: i64| l == spec.exit || seen.contains(&l);
    if !known(spec.initial) {
        return Err(DeobError::UnknownState { label: spec.initial });
    }
    for (_, to, _) in g.edges() {
        if !known(to) {
            return Err(DeobError::UnknownState { label: to });
        }
    }
    Ok(g)
}

/// Labels reachable from the initial state, excluding the exit sentinel.
pub fn live_labels(g: &StateGraph) -> BTreeMap<i64, usize> {
    let reach = g.digraph().reachable(g.entry());
    g.nodes.iter().enumerate().filter(|(i, _)| reach[*i]).map(|(i, n)| (n.label, i)).collect()
}
