//! Name resolution and arity checks run after parsing.
//!
//! Rules: globals and functions share one namespace; within a function every
//! parameter and local has a distinct name that does not shadow a global;
//! locals are visible from their declaration to the end of the enclosing block.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use super::FrontendError;

#[derive(Clone, Copy, PartialEq)]
enum Binding {
    Scalar,
    Array,
}

struct Checker<'a> {
    globals: BTreeMap<&'a str, Binding>,
    functions: BTreeMap<&'a str, (RetType, usize)>,
}

pub fn check(program: &Program) -> Result<(), FrontendError> {
    let mut c = Checker { globals: BTreeMap::new(), functions: BTreeMap::new() };
    for g in &program.globals {
        let b = match g.kind {
            GlobalKind::Scalar(_) => Binding::Scalar,
            GlobalKind::Array(_) => Binding::Array,
        };
        if c.globals.insert(&g.name, b).is_some() {
            return Err(FrontendError::Duplicate { name: g.name.clone(), span: g.span });
        }
    }
    for f in &program.functions {
        if c.globals.contains_key(f.name.as_str())
            || c.functions.insert(&f.name, (f.ret, f.params.len())).is_some()
        {
            return Err(FrontendError::Duplicate { name: f.name.clone(), span: f.span });
        }
    }
    match c.functions.get("main") {
        None => return Err(FrontendError::MissingMain),
        Some((_, n)) if *n != 0 => {
            return Err(FrontendError::Type {
                message: "main takes no parameters".into(),
                span: program.function("main").map(|f| f.span).unwrap_or_default(),
            })
        }
        _ => {}
    }
    for f in &program.functions {
        c.function(f)?;
    }
    Ok(())
}

impl Checker<'_> {
    fn function(&self, f: &FunctionDecl) -> Result<(), FrontendError> {
        let mut declared = BTreeSet::new();
        let mut scope: Vec<Vec<String>> = vec![Vec::new()];
        for p in &f.params {
            if self.globals.contains_key(p.as_str()) || self.functions.contains_key(p.as_str()) || !declared.insert(p.clone())
            {
                return Err(FrontendError::Duplicate { name: p.clone(), span: f.span });
            }
            scope[0].push(p.clone());
        }
        self.block(f, &f.body, &mut declared, &mut scope)
    }

    fn block(
        &self,
        f: &FunctionDecl,
        b: &Block,
        declared: &mut BTreeSet<String>,
        scope: &mut Vec<Vec<String>>,
    ) -> Result<(), FrontendError> {
        scope.push(Vec::new());
        for s in &b.stmts {
            self.stmt(f, s, declared, scope)?;
        }
        scope.pop();
        Ok(())
    }

    fn stmt(
        &self,
        f: &FunctionDecl,
        s: &Stmt,
        declared: &mut BTreeSet<String>,
        scope: &mut Vec<Vec<String>>,
    ) -> Result<(), FrontendError> {
        match &s.kind {
            StmtKind::Decl { name, init } => {
                if let Some(e) = init {
                    self.expr(e, scope)?;
                }
                if self.globals.contains_key(name.as_str())
                    || self.functions.contains_key(name.as_str())
                    || !declared.insert(name.clone())
                {
                    return Err(FrontendError::Duplicate { name: name.clone(), span: s.span });
                }
                scope.last_mut().expect("scope").push(name.clone());
            }
            StmtKind::Assign { target, value } => {
                match target {
                    LValue::Var(n) => self.lookup(n, Binding::Scalar, s.span, scope)?,
                    LValue::Index(n, i) => {
                        self.lookup(n, Binding::Array, s.span, scope)?;
                        self.expr(i, scope)?;
                    }
                }
                self.expr(value, scope)?;
            }
            StmtKind::If { cond, then_block, else_block } => {
                self.expr(cond, scope)?;
                self.block(f, then_block, declared, scope)?;
                if let Some(e) = else_block {
                    self.block(f, e, declared, scope)?;
                }
            }
            StmtKind::While { cond, body } => {
                self.expr(cond, scope)?;
                self.block(f, body, declared, scope)?;
            }
            StmtKind::Return(value) => match (value, f.ret) {
                (Some(e), RetType::Int) => self.expr(e, scope)?,
                (None, RetType::Void) => {}
                (Some(_), RetType::Void) => {
                    return Err(FrontendError::Type {
                        message: format!("void function {} returns a value", f.name),
                        span: s.span,
                    })
                }
                (None, RetType::Int) => {
                    return Err(FrontendError::Type {
                        message: format!("int function {} returns without a value", f.name),
                        span: s.span,
                    })
                }
            },
            StmtKind::Print(e) => self.expr(e, scope)?,
            StmtKind::Call { name, args } => self.call(name, args, s.span, scope)?,
            StmtKind::Block(b) => self.block(f, b, declared, scope)?,
        }
        Ok(())
    }

    fn lookup(&self, name: &str, want: Binding, span: Span, scope: &[Vec<String>]) -> Result<(), FrontendError> {
        let found = if scope.iter().any(|level| level.iter().any(|n| n == name)) {
            Some(Binding::Scalar)
        } else {
            self.globals.get(name).copied()
        };
        match found {
            None => Err(FrontendError::Name { name: name.to_string(), span }),
            Some(b) if b != want => Err(FrontendError::Type {
                message: match want {
                    Binding::Array => format!("{name} is not an array"),
                    Binding::Scalar => format!("array {name} used as a scalar"),
                },
                span,
            }),
            Some(_) => Ok(()),
        }
    }

    fn call(&self, name: &str, args: &[Expr], span: Span, scope: &[Vec<String>]) -> Result<(), FrontendError> {
        match self.functions.get(name) {
            None => return Err(FrontendError::Name { name: name.to_string(), span }),
            Some((_, arity)) if *arity != args.len() => {
                return Err(FrontendError::Type {
                    message: format!("{name} expects {arity} arguments, got {}", args.len()),
                    span,
                })
            }
            _ => {}
        }
        for a in args {
            self.expr(a, scope)?;
        }
        Ok(())
    }

    fn expr(&self, e: &Expr, scope: &[Vec<String>]) -> Result<(), FrontendError> {
        match &e.kind {
            ExprKind::Int(_) => Ok(()),
            ExprKind::Var(n) => self.lookup(n, Binding::Scalar, e.span, scope),
            ExprKind::Index(n, i) => {
                self.lookup(n, Binding::Array, e.span, scope)?;
                self.expr(i, scope)
            }
            ExprKind::Unary(_, x) => self.expr(x, scope),
            ExprKind::Binary(_, l, r) => {
                self.expr(l, scope)?;
                self.expr(r, scope)
            }
            ExprKind::Call(name, args) => {
                if let Some((RetType::Void, _)) = self.functions.get(name.as_str()) {
                    return Err(FrontendError::Type {
                        message: format!("void function {name} used as a value"),
                        span: e.span,
                    });
                }
                self.call(name, args, e.span, scope)
            }
        }
    }
}
