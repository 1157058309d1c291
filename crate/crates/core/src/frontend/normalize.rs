//! Semantics-preserving cleanup: constant folding with wrapping 64-bit
//! arithmetic, double-negation removal, constant-condition branches,
//! nested block splicing and declaration sinking.

use super::ast::*;

/// Fold a binary operation the way the interpreter evaluates it.
/// `None` for division or remainder by zero, which must stay a runtime fault.
pub fn fold_binary(op: BinOp, a: i64, b: i64) -> Option<i64> {
    Some(match op {
        BinOp::Add => a.wrapping_add(b),
        BinOp::Sub => a.wrapping_sub(b),
        BinOp::Mul => a.wrapping_mul(b),
        BinOp::Div => {
            if b == 0 {
                return None;
            }
            a.wrapping_div(b)
        }
        BinOp::Rem => {
            if b == 0 {
                return None;
            }
            a.wrapping_rem(b)
        }
        BinOp::Lt => (a < b) as i64,
        BinOp::Le => (a <= b) as i64,
        BinOp::Gt => (a > b) as i64,
        BinOp::Ge => (a >= b) as i64,
        BinOp::Eq => (a == b) as i64,
        BinOp::Ne => (a != b) as i64,
        BinOp::And => (a != 0 && b != 0) as i64,
        BinOp::Or => (a != 0 || b != 0) as i64,
    })
}

fn is_boolean(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Binary(op, ..) => op.is_boolean(),
        ExprKind::Unary(UnaryOp::Not, _) => true,
        ExprKind::Int(v) => *v == 0 || *v == 1,
        _ => false,
    }
}

pub fn fold_expr(e: &mut Expr) {
    match &mut e.kind {
        ExprKind::Int(_) | ExprKind::Var(_) => {}
        ExprKind::Index(_, i) => fold_expr(i),
        ExprKind::Call(_, args) => args.iter_mut().for_each(fold_expr),
        ExprKind::Unary(op, x) => {
            fold_expr(x);
            let replacement = match (*op, &mut x.kind) {
                (UnaryOp::Neg, ExprKind::Int(v)) => Some(ExprKind::Int(v.wrapping_neg())),
                (UnaryOp::Not, ExprKind::Int(v)) => Some(ExprKind::Int((*v == 0) as i64)),
                (UnaryOp::Neg, ExprKind::Unary(UnaryOp::Neg, inner)) => Some(inner.kind.clone()),
                (UnaryOp::Not, ExprKind::Unary(UnaryOp::Not, inner)) if is_boolean(inner) => Some(inner.kind.clone()),
                _ => None,
            };
            if let Some(k) = replacement {
                e.kind = k;
            }
        }
        ExprKind::Binary(op, l, r) => {
            fold_expr(l);
            fold_expr(r);
            let replacement = match (*op, l.as_int(), r.as_int()) {
                (op, Some(a), Some(b)) => fold_binary(op, a, b).map(ExprKind::Int),
                (BinOp::And, Some(0), _) => Some(ExprKind::Int(0)),
                (BinOp::Or, Some(a), _) if a != 0 => Some(ExprKind::Int(1)),
                _ => None,
            };
            if let Some(k) = replacement {
                e.kind = k;
            }
        }
    }
}

/// `!!e` is `e` wherever only truthiness matters.
fn strip_condition_negations(e: &mut Expr) {
    while let ExprKind::Unary(UnaryOp::Not, inner) = &e.kind {
        match &inner.kind {
            ExprKind::Unary(UnaryOp::Not, x) => {
                let x = (**x).clone();
                *e = x;
            }
            _ => break,
        }
    }
}

fn simplify_stmts(stmts: Vec<Stmt>) -> Vec<Stmt> {
    let mut out = Vec::with_capacity(stmts.len());
    for mut s in stmts {
        for e in s.own_exprs_mut() {
            fold_expr(e);
        }
        match &mut s.kind {
            StmtKind::If { cond, then_block, else_block } => {
                strip_condition_negations(cond);
                if else_block.as_ref().is_some_and(|b| b.stmts.is_empty()) {
                    *else_block = None;
                }
                if let Some(v) = cond.as_int() {
                    if v != 0 {
                        out.append(&mut then_block.stmts);
                    } else if let Some(b) = else_block {
                        out.append(&mut b.stmts);
                    }
                    continue;
                }
                if then_block.stmts.is_empty() && else_block.is_none() && cond.is_pure() {
                    continue;
                }
            }
            StmtKind::While { cond, .. } => {
                strip_condition_negations(cond);
                if cond.as_int() == Some(0) {
                    continue;
                }
            }
            StmtKind::Block(b) => {
                out.append(&mut b.stmts);
                continue;
            }
            _ => {}
        }
        out.push(s);
    }
    out
}

fn is_def_of(s: &Stmt, name: &str) -> bool {
    matches!(&s.kind, StmtKind::Assign { target: LValue::Var(n), value } if n == name && !value.mentions(name))
}

/// Can an uninitialized declaration placed in front of `stmts` be merged into
/// a later definition without changing what any read observes?
fn can_sink(stmts: &[Stmt], name: &str) -> bool {
    let Some(i) = stmts.iter().position(|s| s.mentions(name)) else {
        return false;
    };
    if is_def_of(&stmts[i], name) {
        return true;
    }
    if stmts[i + 1..].iter().any(|s| s.mentions(name)) {
        return false;
    }
    let s = &stmts[i];
    if s.own_exprs().iter().any(|e| e.mentions(name)) {
        return false;
    }
    let blocks: Vec<&Block> = s.child_blocks().into_iter().filter(|b| b.stmts.iter().any(|x| x.mentions(name))).collect();
    blocks.len() == 1 && can_sink(&blocks[0].stmts, name)
}

fn do_sink(stmts: &mut [Stmt], name: &str) {
    let i = stmts.iter().position(|s| s.mentions(name)).expect("checked by can_sink");
    if is_def_of(&stmts[i], name) {
        if let StmtKind::Assign { value, .. } = &stmts[i].kind {
            let value = value.clone();
            let old = &stmts[i];
            stmts[i] = Stmt { id: old.id, span: old.span, kind: StmtKind::Decl { name: name.to_string(), init: Some(value) } };
        }
        return;
    }
    for b in stmts[i].child_blocks_mut() {
        if b.stmts.iter().any(|x| x.mentions(name)) {
            do_sink(&mut b.stmts, name);
            return;
        }
    }
}

fn sink_decls(block: &mut Block) {
    for s in &mut block.stmts {
        for b in s.child_blocks_mut() {
            sink_decls(b);
        }
    }
    let mut k = 0;
    while k < block.stmts.len() {
        if let StmtKind::Decl { name, init: None } = &block.stmts[k].kind {
            let name = name.clone();
            if can_sink(&block.stmts[k + 1..], &name) {
                block.stmts.remove(k);
                do_sink(&mut block.stmts, &name);
                continue;
            }
        }
        k += 1;
    }
}

/// Normalize to a fixpoint. Output behaves identically under the interpreter.
pub fn normalize(program: &Program) -> Program {
    let mut p = program.clone();
    for _ in 0..16 {
        let before = p.clone();
        for f in &mut p.functions {
            rewrite_blocks(&mut f.body, &mut simplify_stmts);
            sink_decls(&mut f.body);
        }
        if p == before {
            break;
        }
    }
    p.renumber();
    p
}
