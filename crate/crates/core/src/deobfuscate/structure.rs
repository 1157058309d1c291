//! Turn a recovered state graph back into structured statements.
//!
//! Loop headers come from dominator back edges. A two-way state whose arms
//! meet again becomes `if`/`else` with the meeting state as join; when one
//! arm can only leave the function it becomes a one-armed `if` and the
//! sequence continues with the other arm.

use std::collections::{BTreeMap, BTreeSet};

use crate::cfg::BackEdgeSet;
use crate::frontend::{Block, Expr, ExprKind, LValue, NodeId, Stmt, StmtKind, UnaryOp};

use super::dispatcher::{StateGraph, Transition};
use super::DeobError;

/// Marks a return that only reproduces falling off the end of the function.
pub(crate) const IMPLICIT_RETURN: NodeId = NodeId::MAX;

/// What leaving the dispatcher means for the function.
#[derive(Debug, Clone, PartialEq)]
pub enum ExitStyle {
    /// Void function: exits become `return;`.
    Void,
    /// Int function with nothing after the loop: exits return 0.
    FallOff,
    /// `return rv;` after the loop where `rv` starts at `init` and is only
    /// written right before an exit: `rv = e` followed by exit becomes `return e;`.
    ReturnVar { var: String, init: i64 },
    /// Any other `return e;` after the loop.
    ReturnExpr(Expr),
}

struct Structurer<'g> {
    g: &'g StateGraph,
    exit: usize,
    back: &'g BackEdgeSet,
    loops: BTreeMap<usize, BTreeSet<usize>>,
    topo_pos: Vec<usize>,
    emitted: Vec<bool>,
    style: &'g ExitStyle,
}

fn fail(reason: impl Into<String>) -> DeobError {
    DeobError::StructuringFailure { reason: reason.into() }
}

fn negate(c: &Expr) -> Expr {
    Expr::unary(UnaryOp::Not, c.clone())
}

impl<'g> Structurer<'g> {
    fn branch_targets(&self, v: usize) -> Option<(Expr, usize, usize)> {
        match &self.g.nodes[v].transition {
            Transition::Branch { cond, on_true, on_false } => {
                Some((cond.clone(), self.g.index(*on_true)?, self.g.index(*on_false)?))
            }
            _ => None,
        }
    }

    /// Nodes reachable from `x` along forward edges without expanding `stops`.
    /// Back-edge targets are recorded but not expanded; the exit sentinel is left out.
    fn reach(&self, x: usize, stops: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![x];
        while let Some(u) = stack.pop() {
            if u == self.exit || !seen.insert(u) || stops.contains(&u) {
                continue;
            }
            for s in self.g.successors(u) {
                if self.back.contains(&(u, s)) {
                    seen.insert(s);
                } else {
                    stack.push(s);
                }
            }
        }
        seen
    }

    fn push_exit(&self, out: &mut Vec<Stmt>) {
        let implicit = |value: Option<Expr>| Stmt { id: IMPLICIT_RETURN, ..Stmt::new(StmtKind::Return(value)) };
        match self.style {
            ExitStyle::Void => out.push(implicit(None)),
            ExitStyle::FallOff => out.push(implicit(Some(Expr::int(0)))),
            ExitStyle::ReturnExpr(e) => out.push(Stmt::new(StmtKind::Return(Some(e.clone())))),
            ExitStyle::ReturnVar { var, init } => {
                let value = match out.last().map(|s| &s.kind) {
                    Some(StmtKind::Assign { target: LValue::Var(n), value }) if n == var => Some(value.clone()),
                    _ => None,
                };
                match value {
                    Some(e) => {
                        out.pop();
                        out.push(Stmt::new(StmtKind::Return(Some(e))));
                    }
                    None => out.push(implicit(Some(Expr::int(*init)))),
                }
            }
        }
    }

    fn seq(&mut self, mut v: usize, stops: &BTreeSet<usize>) -> Result<Vec<Stmt>, DeobError> {
        let mut out = Vec::new();
        loop {
            if stops.contains(&v) {
                return Ok(out);
            }
            if v == self.exit {
                self.push_exit(&mut out);
                return Ok(out);
            }
            if std::mem::replace(&mut self.emitted[v], true) {
                return Err(fail(format!("state {} is entered from two unrelated regions", self.g.nodes[v].label)));
            }
            if let Some(body_set) = self.loops.get(&v).cloned() {
                let node = &self.g.nodes[v];
                if !node.stmts.is_empty() {
                    return Err(fail(format!("loop header state {} has statements", node.label)));
                }
                let (c, t, f) = self.branch_targets(v).ok_or_else(|| fail(format!("loop header state {} does not branch", node.label)))?;
                let (cond, inside, outside) = match (body_set.contains(&t), body_set.contains(&f)) {
                    (true, false) => (c, t, f),
                    (false, true) => (negate(&c), f, t),
                    _ => return Err(fail(format!("loop at state {} has no single exit", node.label))),
                };
                let body = self.seq(inside, &BTreeSet::from([v]))?;
                out.push(Stmt::new(StmtKind::While { cond, body: Block::new(body) }));
                v = outside;
                continue;
            }
            out.extend(self.g.nodes[v].stmts.iter().cloned());
            match &self.g.nodes[v].transition {
                Transition::Goto(_) => {
                    let t = self.g.successors(v)[0];
                    if self.back.contains(&(v, t)) && !stops.contains(&t) {
                        return Err(fail(format!("state {} jumps back outside its loop", self.g.nodes[v].label)));
                    }
                    v = t;
                }
                Transition::Stay => return Err(fail(format!("state {} never updates the state variable", self.g.nodes[v].label))),
                Transition::Branch { .. } => {
                    let (c, t, f) = self.branch_targets(v).expect("branch");
                    let rt = self.reach(t, stops);
                    let rf = self.reach(f, stops);
                    let here = self.topo_pos[v];
                    let join = rt
                        .intersection(&rf)
                        .filter(|&&x| self.topo_pos[x] > here || stops.contains(&x))
                        .min_by_key(|&&x| (self.topo_pos[x] <= here, self.topo_pos[x]))
                        .copied();
                    match join {
                        Some(j) => {
                            let mut inner = stops.clone();
                            inner.insert(j);
                            let then_stmts = self.seq(t, &inner)?;
                            let else_stmts = if f == j { None } else { Some(self.seq(f, &inner)?) };
                            let stmt = match else_stmts {
                                Some(e) if t == j => if_stmt(negate(&c), e, None),
                                e => if_stmt(c, then_stmts, e),
                            };
                            out.push(stmt);
                            v = j;
                        }
                        None if !rt.iter().any(|x| stops.contains(x)) => {
                            let then_stmts = self.seq(t, stops)?;
                            out.push(if_stmt(c, then_stmts, None));
                            v = f;
                        }
                        None if !rf.iter().any(|x| stops.contains(x)) => {
                            let then_stmts = self.seq(f, stops)?;
                            out.push(if_stmt(negate(&c), then_stmts, None));
                            v = t;
                        }
                        None => {
                            return Err(fail(format!("branch at state {} leaves its region on both sides", self.g.nodes[v].label)));
                        }
                    }
                }
            }
        }
    }
}

fn if_stmt(cond: Expr, then_stmts: Vec<Stmt>, else_stmts: Option<Vec<Stmt>>) -> Stmt {
    Stmt::new(StmtKind::If { cond, then_block: Block::new(then_stmts), else_block: else_stmts.map(Block::new) })
}

/// Natural loop of every back-edge target: the header plus all nodes that
/// reach a latch without passing through the header.
fn natural_loops(g: &StateGraph, back: &BackEdgeSet) -> BTreeMap<usize, BTreeSet<usize>> {
    let preds = g.digraph().preds();
    let mut loops: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for &(latch, header) in back {
        let body = loops.entry(header).or_insert_with(|| BTreeSet::from([header]));
        let mut stack = vec![latch];
        while let Some(u) = stack.pop() {
            if body.insert(u) {
                stack.extend(preds[u].iter().copied());
            }
        }
    }
    loops
}

/// Structured statements equivalent to running the dispatcher from its initial state.
pub fn reconstruct_cfg(g: &StateGraph, back: &BackEdgeSet, style: &ExitStyle) -> Result<Vec<Stmt>, DeobError> {
    let dg = g.digraph();
    let entry = g.entry();
    let order = dg
        .topo_order(entry, back)
        .map_err(|remaining| fail(format!("irreducible state graph ({} states on a cycle)", remaining.len())))?;
    let mut topo_pos = vec![usize::MAX; dg.len()];
    for (k, &u) in order.iter().enumerate() {
        topo_pos[u] = k;
    }
    let mut s = Structurer {
        g,
        exit: g.exit_index(),
        back,
        loops: natural_loops(g, back),
        topo_pos,
        emitted: vec![false; g.nodes.len()],
        style,
    };
    let mut body = s.seq(entry, &BTreeSet::new())?;
    if let Some(last) = body.last() {
        let drop_tail = last.id == IMPLICIT_RETURN
            && match &last.kind {
                StmtKind::Return(None) => true,
                StmtKind::Return(Some(e)) => matches!(e.kind, ExprKind::Int(0)),
                _ => false,
            };
        if drop_tail {
            body.pop();
        }
    }
    Ok(body)
}
