//! Dead variable and unreachable statement removal.

use std::collections::BTreeSet;

use crate::frontend::{rewrite_blocks, Block, Expr, ExprKind, FunctionDecl, GlobalKind, LValue, Program, Stmt, StmtKind};

/// Does anything read `name` other than an assignment to `name` itself?
fn is_read(stmts: &[Stmt], name: &str) -> bool {
    let mut read = false;
    for s in stmts {
        s.walk(&mut |x| {
            let self_update = matches!(&x.kind, StmtKind::Assign { target: LValue::Var(n), .. } | StmtKind::Decl { name: n, .. } if n == name);
            if self_update {
                return;
            }
            if x.own_exprs().iter().any(|e| e.mentions(name)) {
                read = true;
            }
        });
    }
    read
}

/// The value stored into a dead variable can be dropped, or kept as a call statement.
fn droppable(value: &Expr) -> bool {
    value.is_pure() || matches!(value.kind, ExprKind::Call(..))
}

fn defs_droppable(stmts: &[Stmt], name: &str) -> bool {
    let mut ok = true;
    for s in stmts {
        s.walk(&mut |x| match &x.kind {
            StmtKind::Decl { name: n, init: Some(v) } | StmtKind::Assign { target: LValue::Var(n), value: v } if n == name => {
                ok &= droppable(v);
            }
            StmtKind::Assign { target: LValue::Index(n, _), .. } if n == name => ok = false,
            _ => {}
        });
    }
    ok
}

fn drop_defs(block: &mut Block, name: &str) {
    rewrite_blocks(block, &mut |stmts| {
        stmts
            .into_iter()
            .filter_map(|s| {
                let value = match &s.kind {
                    StmtKind::Decl { name: n, init } if n == name => init.clone(),
                    StmtKind::Assign { target: LValue::Var(n), value } if n == name => Some(value.clone()),
                    _ => return Some(s),
                };
                match value.map(|v| v.kind) {
                    Some(ExprKind::Call(callee, args)) => Some(Stmt { kind: StmtKind::Call { name: callee, args }, ..s }),
                    _ => None,
                }
            })
            .collect()
    });
}

fn truncate_after_return(block: &mut Block) {
    rewrite_blocks(block, &mut |mut stmts| {
        if let Some(i) = stmts.iter().position(|s| matches!(s.kind, StmtKind::Return(_))) {
            stmts.truncate(i + 1);
        }
        stmts
    });
}

fn dead_locals(f: &FunctionDecl) -> Vec<String> {
    f.locals()
        .into_iter()
        .filter(|l| !is_read(&f.body.stmts, l) && defs_droppable(&f.body.stmts, l))
        .collect()
}

/// Remove, to a fixpoint, locals and scalar globals that nothing reads,
/// arrays nothing mentions, and statements after a `return`. Returns the
/// cleaned program and the removed variable names (locals as `function::name`).
pub fn remove_dead_code(p: &Program) -> (Program, Vec<String>) {
    let mut out = p.clone();
    let mut removed = Vec::new();
    for f in &mut out.functions {
        truncate_after_return(&mut f.body);
    }
    loop {
        let mut changed = false;
        for f in &mut out.functions {
            for l in dead_locals(f) {
                drop_defs(&mut f.body, &l);
                removed.push(format!("{}::{}", f.name, l));
                changed = true;
            }
        }
        let mut dead_globals = BTreeSet::new();
        let stmts: Vec<Stmt> = out.functions.iter().flat_map(|f| f.body.stmts.iter().cloned()).collect();
        for g in &out.globals {
            let dead = match g.kind {
                GlobalKind::Scalar(_) => !is_read(&stmts, &g.name) && defs_droppable(&stmts, &g.name),
                GlobalKind::Array(_) => !stmts.iter().any(|s| s.mentions(&g.name)),
            };
            if dead {
                dead_globals.insert(g.name.clone());
            }
        }
        if !dead_globals.is_empty() {
            for name in &dead_globals {
                for f in &mut out.functions {
                    drop_defs(&mut f.body, name);
                }
                removed.push(name.clone());
            }
            out.globals.retain(|g| !dead_globals.contains(&g.name));
            changed = true;
        }
        if !changed {
            break;
        }
    }
    out.renumber();
    (out, removed)
}
