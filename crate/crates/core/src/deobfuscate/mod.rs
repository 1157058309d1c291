//! Static deobfuscation in five phases: dispatcher detection, state graph
//! recovery, structured reconstruction, opaque predicate elimination and
//! dead code removal, followed by normalization.

pub mod dead;
pub mod dispatcher;
pub mod opaque;
pub mod structure;

use serde::Serialize;
use thiserror::Error;

use crate::frontend::{normalize, Block, ExprKind, FunctionDecl, LValue, Program, RetType, Stmt, StmtKind};

pub use dead::remove_dead_code;
pub use dispatcher::{
    analyze_transitions, build_state_graph, detect_dispatcher, extract_cases, extract_state_var, DispatcherInfo, StateGraph,
    StateNode, StateVarInfo, Transition,
};
pub use opaque::{eliminate_opaque, evaluate_predicate, identify_opaque, value_analysis, OpaqueFinding, ValueAnalysis, Verdict};
pub use structure::{reconstruct_cfg, ExitStyle};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeobError {
    #[error("state variable {var} of {function} has no unique constant initialization")]
    AmbiguousInit { function: String, var: String },
    #[error("cannot resolve the transition out of state {label}: {reason}")]
    UnresolvedTransition { label: i64, reason: String },
    #[error("transition to state {label}, which has no arm")]
    UnknownState { label: i64 },
    #[error("structuring failed: {reason}")]
    StructuringFailure { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FunctionOutcome {
    pub function: String,
    pub recovered: bool,
    pub states: usize,
    pub edges: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DeobReport {
    pub dispatchers: usize,
    pub states: usize,
    pub edges: usize,
    pub predicates_true: usize,
    pub predicates_false: usize,
    pub predicates_unknown: usize,
    pub dead_vars_removed: usize,
    pub structuring_failures: usize,
    pub functions: Vec<FunctionOutcome>,
    pub findings: Vec<OpaqueFinding>,
    pub dead_vars: Vec<String>,
}

impl DeobReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }
}

fn exit_style(f: &FunctionDecl, d: &DispatcherInfo, g: &StateGraph) -> Result<ExitStyle, DeobError> {
    let suffix = &f.body.stmts[d.loop_index + 1..];
    let unsupported = || DeobError::StructuringFailure { reason: "statements after the dispatcher loop".into() };
    match (f.ret, suffix) {
        (RetType::Void, []) => Ok(ExitStyle::Void),
        (RetType::Void, [s]) if matches!(s.kind, StmtKind::Return(None)) => Ok(ExitStyle::Void),
        (RetType::Int, []) => Ok(ExitStyle::FallOff),
        (RetType::Int, [s]) => {
            let StmtKind::Return(Some(e)) = &s.kind else { return Err(unsupported()) };
            if let ExprKind::Var(rv) = &e.kind {
                if let Some(init) = pure_return_var(f, d, g, rv) {
                    return Ok(ExitStyle::ReturnVar { var: rv.clone(), init });
                }
            }
            Ok(ExitStyle::ReturnExpr(e.clone()))
        }
        _ => Err(unsupported()),
    }
}

/// `rv` is a local initialized to a constant before the loop, never read by
/// the arms, and written only as the last statement of arms that exit.
fn pure_return_var(f: &FunctionDecl, d: &DispatcherInfo, g: &StateGraph, rv: &str) -> Option<i64> {
    if rv == d.state_var || !f.locals().iter().any(|l| l == rv) {
        return None;
    }
    let mut init = None;
    for s in &f.body.stmts[..d.loop_index] {
        match &s.kind {
            StmtKind::Decl { name, init: i } if name == rv => init = Some(i.as_ref().map_or(Some(0), |e| e.as_int())?),
            StmtKind::Assign { target: LValue::Var(n), value } if n == rv => init = Some(value.as_int()?),
            _ if s.mentions(rv) => return None,
            _ => {}
        }
    }
    for n in &g.nodes {
        let exits = matches!(n.transition, Transition::Goto(t) if t == g.exit);
        for (k, s) in n.stmts.iter().enumerate() {
            let last = k + 1 == n.stmts.len();
            match &s.kind {
                StmtKind::Assign { target: LValue::Var(x), value } if x == rv => {
                    if !(last && exits) || value.mentions(rv) {
                        return None;
                    }
                }
                _ if s.mentions(rv) => return None,
                _ => {}
            }
        }
        if let Transition::Branch { cond, .. } = &n.transition {
            if cond.mentions(rv) {
                return None;
            }
        }
    }
    init
}

fn recover_function(f: &FunctionDecl, d: &DispatcherInfo) -> Result<(FunctionDecl, StateGraph), DeobError> {
    let spec = extract_state_var(f, d)?;
    let g = build_state_graph(d, &spec)?;
    let style = exit_style(f, d, &g)?;
    let back = g.digraph().back_edges(g.entry());
    let structured = reconstruct_cfg(&g, &back, &style)?;
    let mut body: Vec<Stmt> = f.body.stmts[..d.loop_index].to_vec();
    body.extend(structured);
    Ok((FunctionDecl { body: Block::new(body), ..f.clone() }, g))
}

/// Run all phases. Functions whose dispatcher cannot be structured stay
/// flattened and are reported; the run itself never fails.
pub fn deobfuscate(p: &Program) -> (Program, DeobReport) {
    let mut report = DeobReport::default();
    let mut out = p.clone();

    let dispatchers = detect_dispatcher(&out);
    report.dispatchers = dispatchers.len();
    for d in &dispatchers {
        let fi = out.functions.iter().position(|f| f.name == d.function).expect("detected in this program");
        match recover_function(&out.functions[fi], d) {
            Ok((f, g)) => {
                let edges = g.edges().len();
                report.states += g.nodes.len();
                report.edges += edges;
                report.functions.push(FunctionOutcome { function: f.name.clone(), recovered: true, states: g.nodes.len(), edges, error: None });
                out.functions[fi] = f;
            }
            Err(e) => {
                report.structuring_failures += 1;
                report.functions.push(FunctionOutcome {
                    function: d.function.clone(),
                    recovered: false,
                    states: d.arms.len(),
                    edges: 0,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    out.renumber();

    let findings = identify_opaque(&out);
    for f in &findings {
        match f.verdict {
            Verdict::True => report.predicates_true += 1,
            Verdict::False => report.predicates_false += 1,
            Verdict::Unknown => report.predicates_unknown += 1,
        }
    }
    out = eliminate_opaque(&out, &findings);
    report.findings = findings;

    let (cleaned, dead) = remove_dead_code(&out);
    report.dead_vars_removed = dead.len();
    report.dead_vars = dead;

    (normalize(&cleaned), report)
}
