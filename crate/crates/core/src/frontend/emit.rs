//! Canonical MiniLang printer: two-space indent, one statement per line,
//! braces always present, globals before functions.

use std::fmt::Write;

use super::ast::*;

const UNARY_PREC: u8 = 7;
const ATOM_PREC: u8 = 9;

fn prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Binary(op, ..) => op.precedence(),
        ExprKind::Unary(..) => UNARY_PREC,
        _ => ATOM_PREC,
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e);
    out
}

fn write_expr(out: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::Int(v) => {
            let _ = write!(out, "{v}");
        }
        ExprKind::Var(n) => out.push_str(n),
        ExprKind::Index(n, i) => {
            out.push_str(n);
            out.push('[');
            write_expr(out, i);
            out.push(']');
        }
        ExprKind::Call(n, args) => {
            out.push_str(n);
            out.push('(');
            for (k, a) in args.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a);
            }
            out.push(')');
        }
        ExprKind::Unary(op, x) => {
            out.push(match op {
                UnaryOp::Neg => '-',
                UnaryOp::Not => '!',
            });
            // `-5` would re-parse as a literal, so keep the negation explicit
            let wrap = prec(x) < UNARY_PREC || (*op == UnaryOp::Neg && matches!(x.kind, ExprKind::Int(_)));
            write_wrapped(out, x, wrap);
        }
        ExprKind::Binary(op, l, r) => {
            write_wrapped(out, l, prec(l) < op.precedence());
            let _ = write!(out, " {} ", op.symbol());
            write_wrapped(out, r, prec(r) <= op.precedence());
        }
    }
}

fn write_wrapped(out: &mut String, e: &Expr, wrap: bool) {
    if wrap {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_block_body(out: &mut String, b: &Block, depth: usize) {
    for s in &b.stmts {
        write_stmt(out, s, depth);
    }
}

fn write_if_tail(out: &mut String, cond: &Expr, then_block: &Block, else_block: &Option<Block>, depth: usize) {
    let _ = writeln!(out, "if ({}) {{", expr_to_string(cond));
    write_block_body(out, then_block, depth + 1);
    indent(out, depth);
    match else_block {
        None => out.push_str("}\n"),
        Some(eb) => match eb.stmts.as_slice() {
            [Stmt { kind: StmtKind::If { cond, then_block, else_block }, .. }] => {
                out.push_str("} else ");
                write_if_tail(out, cond, then_block, else_block, depth);
            }
            _ => {
                out.push_str("} else {\n");
                write_block_body(out, eb, depth + 1);
                indent(out, depth);
                out.push_str("}\n");
            }
        },
    }
}

pub fn stmt_to_string(s: &Stmt, depth: usize) -> String {
    let mut out = String::new();
    write_stmt(&mut out, s, depth);
    out
}

fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match &s.kind {
        StmtKind::Decl { name, init: None } => {
            let _ = writeln!(out, "int {name};");
        }
        StmtKind::Decl { name, init: Some(e) } => {
            let _ = writeln!(out, "int {name} = {};", expr_to_string(e));
        }
        StmtKind::Assign { target, value } => {
            match target {
                LValue::Var(n) => out.push_str(n),
                LValue::Index(n, i) => {
                    let _ = write!(out, "{n}[{}]", expr_to_string(i));
                }
            }
            let _ = writeln!(out, " = {};", expr_to_string(value));
        }
        StmtKind::If { cond, then_block, else_block } => write_if_tail(out, cond, then_block, else_block, depth),
        StmtKind::While { cond, body } => {
            let _ = writeln!(out, "while ({}) {{", expr_to_string(cond));
            write_block_body(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::Return(None) => out.push_str("return;\n"),
        StmtKind::Return(Some(e)) => {
            let _ = writeln!(out, "return {};", expr_to_string(e));
        }
        StmtKind::Print(e) => {
            let _ = writeln!(out, "print({});", expr_to_string(e));
        }
        StmtKind::Call { name, args } => {
            let call = Expr::new(ExprKind::Call(name.clone(), args.clone()));
            let _ = writeln!(out, "{};", expr_to_string(&call));
        }
        StmtKind::Block(b) => {
            out.push_str("{\n");
            write_block_body(out, b, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
    }
}

pub fn function_to_string(f: &FunctionDecl) -> String {
    let mut out = String::new();
    let ret = match f.ret {
        RetType::Int => "int",
        RetType::Void => "void",
    };
    let params: Vec<String> = f.params.iter().map(|p| format!("int {p}")).collect();
    let _ = writeln!(out, "{ret} {}({}) {{", f.name, params.join(", "));
    write_block_body(&mut out, &f.body, 1);
    out.push_str("}\n");
    out
}

/// Deterministic canonical text for a program.
pub fn emit(program: &Program) -> String {
    let mut out = String::new();
    for g in &program.globals {
        match g.kind {
            GlobalKind::Scalar(v) => {
                let _ = writeln!(out, "int {} = {v};", g.name);
            }
            GlobalKind::Array(n) => {
                let _ = writeln!(out, "int {}[{n}];", g.name);
            }
        }
    }
    for (k, f) in program.functions.iter().enumerate() {
        if k > 0 || !program.globals.is_empty() {
            out.push('\n');
        }
        out.push_str(&function_to_string(f));
    }
    out
}
