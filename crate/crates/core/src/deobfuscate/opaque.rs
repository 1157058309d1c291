//! Decide branch conditions whose outcome never varies.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::frontend::emit::expr_to_string;
use crate::frontend::normalize::fold_expr;
use crate::frontend::{Block, Expr, ExprKind, GlobalKind, LValue, NodeId, Program, Stmt, StmtKind};
use crate::obfuscate::patterns::{Domain, PATTERNS};
use crate::obfuscate::PredicatePattern;

/// Most operand combinations tried by exhaustive evaluation.
pub const MAX_COMBINATIONS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    True,
    False,
    Unknown,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::True => "true",
            Verdict::False => "false",
            Verdict::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OpaqueFinding {
    pub function: String,
    pub node: NodeId,
    pub condition: String,
    /// Library pattern the condition matched, if any.
    pub pattern: Option<String>,
    pub witness: String,
    /// Global operands the verdict depends on.
    pub operands: Vec<String>,
    pub verdict: Verdict,
}

/// Possible values of scalar globals that are only ever assigned literals.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValueAnalysis {
    pub sets: BTreeMap<String, BTreeSet<i64>>,
    /// Globals never assigned after initialization.
    pub constant: BTreeSet<String>,
}

pub fn value_analysis(p: &Program) -> ValueAnalysis {
    let mut sets: BTreeMap<String, BTreeSet<i64>> = BTreeMap::new();
    for g in &p.globals {
        if let GlobalKind::Scalar(v) = g.kind {
            sets.insert(g.name.clone(), BTreeSet::from([v]));
        }
    }
    let mut constant: BTreeSet<String> = sets.keys().cloned().collect();
    let mut unbounded = BTreeSet::new();
    p.walk_stmts(&mut |_, s| {
        if let StmtKind::Assign { target: LValue::Var(n), value } = &s.kind {
            if let Some(set) = sets.get_mut(n) {
                constant.remove(n);
                match value.as_int() {
                    Some(k) => {
                        set.insert(k);
                    }
                    None => {
                        unbounded.insert(n.clone());
                    }
                }
            }
        }
    });
    for n in unbounded {
        sets.remove(&n);
    }
    ValueAnalysis { sets, constant }
}

/// Structural match of `e` against a template, binding template variables to
/// program variables. Commutative operators match in either operand order.
fn unify(template: &Expr, e: &Expr, bind: &mut BTreeMap<String, String>) -> bool {
    match (&template.kind, &e.kind) {
        (ExprKind::Int(a), ExprKind::Int(b)) => a == b,
        (ExprKind::Var(x), ExprKind::Var(v)) => match bind.get(x) {
            Some(bound) => bound == v,
            None => {
                if bind.values().any(|b| b == v) {
                    return false;
                }
                bind.insert(x.clone(), v.clone());
                true
            }
        },
        (ExprKind::Unary(o1, a), ExprKind::Unary(o2, b)) => o1 == o2 && unify(a, b, bind),
        (ExprKind::Binary(o1, l1, r1), ExprKind::Binary(o2, l2, r2)) if o1 == o2 => {
            let saved = bind.clone();
            if unify(l1, l2, bind) && unify(r1, r2, bind) {
                return true;
            }
            *bind = saved.clone();
            if o1.is_commutative() && unify(l1, r2, bind) && unify(r1, l2, bind) {
                return true;
            }
            *bind = saved;
            false
        }
        _ => false,
    }
}

fn match_pattern(cond: &Expr) -> Option<(PredicatePattern, Vec<String>)> {
    for p in PATTERNS {
        let template = crate::frontend::parse_expression(p.template).expect("templates parse");
        let mut bind = BTreeMap::new();
        if unify(&template, cond, &mut bind) {
            let operands = ["x", "y"][..p.arity].iter().filter_map(|k| bind.get(*k).cloned()).collect();
            return Some((p, operands));
        }
    }
    None
}

fn free_vars(e: &Expr) -> Option<BTreeSet<String>> {
    let mut vars = BTreeSet::new();
    let mut closed = true;
    e.walk(&mut |x| match &x.kind {
        ExprKind::Var(v) => {
            vars.insert(v.clone());
        }
        ExprKind::Index(..) | ExprKind::Call(..) => closed = false,
        _ => {}
    });
    closed.then_some(vars)
}

fn substitute(e: &Expr, values: &BTreeMap<&str, i64>) -> Option<bool> {
    let mut e = e.clone();
    e.walk_mut(&mut |x| {
        if let ExprKind::Var(v) = &x.kind {
            x.kind = ExprKind::Int(values[v.as_str()]);
        }
    });
    fold_expr(&mut e);
    e.as_int().map(|v| v != 0)
}

/// Verdict plus the matched pattern, a human-readable witness and the operands involved.
pub fn evaluate_predicate(cond: &Expr, va: &ValueAnalysis) -> (Verdict, Option<String>, String, Vec<String>) {
    if let Some((p, operands)) = match_pattern(cond) {
        let mut values = Vec::new();
        for o in &operands {
            if !va.constant.contains(o) {
                return (Verdict::Unknown, Some(p.id.into()), format!("operand {o} is not a constant global"), operands);
            }
            values.push(*va.sets[o].iter().next().expect("initializer"));
        }
        let in_domain = match p.domain {
            Domain::Full => true,
            Domain::Bounded { lo, hi } => values.iter().all(|v| (lo..hi).contains(v)),
        };
        if in_domain {
            let verdict = if p.outcome.as_bool() { Verdict::True } else { Verdict::False };
            return (verdict, Some(p.id.into()), format!("pattern {} with operands {:?}", p.id, values), operands);
        }
    }
    let Some(vars) = free_vars(cond) else {
        return (Verdict::Unknown, None, "condition reads memory or calls".into(), vec![]);
    };
    let operands: Vec<String> = vars.iter().cloned().collect();
    let mut sets = Vec::new();
    let mut combos: usize = 1;
    for v in &vars {
        match va.sets.get(v) {
            Some(s) => {
                combos = combos.saturating_mul(s.len());
                sets.push((v.as_str(), s.iter().copied().collect::<Vec<_>>()));
            }
            None => return (Verdict::Unknown, None, format!("{v} has no finite value set"), operands),
        }
    }
    if combos > MAX_COMBINATIONS {
        return (Verdict::Unknown, None, format!("{combos} combinations exceed the limit"), operands);
    }
    let mut outcome: Option<bool> = None;
    for k in 0..combos {
        let mut rest = k;
        let mut values = BTreeMap::new();
        for (name, set) in &sets {
            values.insert(*name, set[rest % set.len()]);
            rest /= set.len();
        }
        match (substitute(cond, &values), outcome) {
            (None, _) => return (Verdict::Unknown, None, "evaluation faults".into(), operands),
            (Some(b), None) => outcome = Some(b),
            (Some(b), Some(prev)) if b != prev => return (Verdict::Unknown, None, "outcome varies".into(), operands),
            _ => {}
        }
    }
    let verdict = if outcome.expect("at least one combination") { Verdict::True } else { Verdict::False };
    (verdict, None, format!("exhaustive over {combos} value combinations"), operands)
}

/// Report every `if` whose condition matches a library pattern or depends
/// only on globals. Conditions over other variables are not reported.
pub fn identify_opaque(p: &Program) -> Vec<OpaqueFinding> {
    let va = value_analysis(p);
    let globals: BTreeSet<&str> = p.globals.iter().map(|g| g.name.as_str()).collect();
    let mut out = Vec::new();
    p.walk_stmts(&mut |f, s| {
        let StmtKind::If { cond, .. } = &s.kind else { return };
        let only_globals = free_vars(cond).is_some_and(|vs| vs.iter().all(|v| globals.contains(v.as_str())));
        if !only_globals && match_pattern(cond).is_none() {
            return;
        }
        let (verdict, pattern, witness, operands) = evaluate_predicate(cond, &va);
        out.push(OpaqueFinding {
            function: f.name.clone(),
            node: s.id,
            condition: expr_to_string(cond),
            pattern,
            witness,
            operands,
            verdict,
        });
    });
    out
}

fn eliminate_in(b: &mut Block, decided: &BTreeMap<NodeId, Verdict>) {
    let mut out = Vec::with_capacity(b.stmts.len());
    for mut s in std::mem::take(&mut b.stmts) {
        for cb in s.child_blocks_mut() {
            eliminate_in(cb, decided);
        }
        let verdict = decided.get(&s.id).copied();
        match (s.kind, verdict) {
            (StmtKind::If { then_block, .. }, Some(Verdict::True)) => out.extend(then_block.stmts),
            (StmtKind::If { else_block, .. }, Some(Verdict::False)) => out.extend(else_block.into_iter().flat_map(|b| b.stmts)),
            (kind, _) => out.push(Stmt { kind, ..s }),
        }
    }
    b.stmts = out;
}

/// Replace decided conditionals by the arm that always runs. `unknown`
/// findings are left alone.
pub fn eliminate_opaque(p: &Program, findings: &[OpaqueFinding]) -> Program {
    let decided: BTreeMap<NodeId, Verdict> =
        findings.iter().filter(|f| f.verdict != Verdict::Unknown).map(|f| (f.node, f.verdict)).collect();
    let mut out = p.clone();
    for f in &mut out.functions {
        eliminate_in(&mut f.body, &decided);
    }
    out.renumber();
    out
}
