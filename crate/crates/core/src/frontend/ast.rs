//! MiniLang syntax tree.
//!
//! Every statement and expression carries a node id and a source span.
//! Equality on [`Stmt`] and [`Expr`] is *structural*: ids and spans are
//! ignored, so `parse(emit(a)) == a` is the round-trip property.

use std::fmt;

/// Byte range plus 1-based line/column of the first byte.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }

    pub fn is_commutative(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Mul | BinOp::Eq | BinOp::Ne)
    }

    /// Comparison and logical operators always yield 0 or 1.
    pub fn is_boolean(self) -> bool {
        self.precedence() <= 4
    }
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub id: NodeId,
    pub span: Span,
    pub kind: ExprKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Var(String),
    Index(String, Box<Expr>),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Expr { id: 0, span: Span::default(), kind }
    }

    pub fn int(v: i64) -> Self {
        Expr::new(ExprKind::Int(v))
    }

    pub fn var(name: impl Into<String>) -> Self {
        Expr::new(ExprKind::Var(name.into()))
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)))
    }

    pub fn unary(op: UnaryOp, e: Expr) -> Self {
        Expr::new(ExprKind::Unary(op, Box::new(e)))
    }

    pub fn as_int(&self) -> Option<i64> {
        match self.kind {
            ExprKind::Int(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Var(v) => Some(v),
            _ => None,
        }
    }

    /// True when evaluation cannot have side effects or fail.
    /// Division and indexing can fault, calls can do anything.
    pub fn is_pure(&self) -> bool {
        match &self.kind {
            ExprKind::Int(_) | ExprKind::Var(_) => true,
            ExprKind::Index(..) | ExprKind::Call(..) => false,
            ExprKind::Unary(_, e) => e.is_pure(),
            ExprKind::Binary(op, l, r) => {
                !matches!(op, BinOp::Div | BinOp::Rem) && l.is_pure() && r.is_pure()
            }
        }
    }

    pub fn contains_call(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e.kind, ExprKind::Call(..)));
        found
    }

    /// Pre-order traversal.
    pub fn walk(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Int(_) | ExprKind::Var(_) => {}
            ExprKind::Index(_, i) => i.walk(f),
            ExprKind::Unary(_, e) => e.walk(f),
            ExprKind::Binary(_, l, r) => {
                l.walk(f);
                r.walk(f);
            }
            ExprKind::Call(_, args) => args.iter().for_each(|a| a.walk(f)),
        }
    }

    pub fn walk_mut(&mut self, f: &mut dyn FnMut(&mut Expr)) {
        f(self);
        match &mut self.kind {
            ExprKind::Int(_) | ExprKind::Var(_) => {}
            ExprKind::Index(_, i) => i.walk_mut(f),
            ExprKind::Unary(_, e) => e.walk_mut(f),
            ExprKind::Binary(_, l, r) => {
                l.walk_mut(f);
                r.walk_mut(f);
            }
            ExprKind::Call(_, args) => args.iter_mut().for_each(|a| a.walk_mut(f)),
        }
    }

    /// Whether the variable (scalar or array) is read anywhere in the expression.
    pub fn mentions(&self, name: &str) -> bool {
        let mut found = false;
        self.walk(&mut |e| match &e.kind {
            ExprKind::Var(v) | ExprKind::Index(v, _) if v == name => found = true,
            _ => {}
        });
        found
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LValue {
    Var(String),
    Index(String, Expr),
}

impl LValue {
    pub fn name(&self) -> &str {
        match self {
            LValue::Var(n) | LValue::Index(n, _) => n,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Block {
    pub stmts: Vec<Stmt>,
}

impl Block {
    pub fn new(stmts: Vec<Stmt>) -> Self {
        Block { stmts }
    }
}

#[derive(Debug, Clone)]
pub struct Stmt {
    pub id: NodeId,
    pub span: Span,
    pub kind: StmtKind,
}

impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    /// Local scalar declaration; without initializer the value is 0.
    Decl { name: String, init: Option<Expr> },
    Assign { target: LValue, value: Expr },
    If { cond: Expr, then_block: Block, else_block: Option<Block> },
    While { cond: Expr, body: Block },
    Return(Option<Expr>),
    Print(Expr),
    /// Call evaluated for its effects; the result is discarded.
    Call { name: String, args: Vec<Expr> },
    Block(Block),
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Self {
        Stmt { id: 0, span: Span::default(), kind }
    }

    pub fn assign(name: impl Into<String>, value: Expr) -> Self {
        Stmt::new(StmtKind::Assign { target: LValue::Var(name.into()), value })
    }

    pub fn decl(name: impl Into<String>, init: Option<Expr>) -> Self {
        Stmt::new(StmtKind::Decl { name: name.into(), init })
    }

    /// Expressions directly owned by this statement (not nested statements).
    pub fn own_exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Decl { init, .. } => init.iter().collect(),
            StmtKind::Assign { target, value } => match target {
                LValue::Var(_) => vec![value],
                LValue::Index(_, i) => vec![i, value],
            },
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => vec![cond],
            StmtKind::Return(e) => e.iter().collect(),
            StmtKind::Print(e) => vec![e],
            StmtKind::Call { args, .. } => args.iter().collect(),
            StmtKind::Block(_) => vec![],
        }
    }

    pub fn own_exprs_mut(&mut self) -> Vec<&mut Expr> {
        match &mut self.kind {
            StmtKind::Decl { init, .. } => init.iter_mut().collect(),
            StmtKind::Assign { target, value } => match target {
                LValue::Var(_) => vec![value],
                LValue::Index(_, i) => vec![i, value],
            },
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => vec![cond],
            StmtKind::Return(e) => e.iter_mut().collect(),
            StmtKind::Print(e) => vec![e],
            StmtKind::Call { args, .. } => args.iter_mut().collect(),
            StmtKind::Block(_) => vec![],
        }
    }

    pub fn child_blocks(&self) -> Vec<&Block> {
        match &self.kind {
            StmtKind::If { then_block, else_block, .. } => {
                let mut v = vec![then_block];
                v.extend(else_block.iter());
                v
            }
            StmtKind::While { body, .. } => vec![body],
            StmtKind::Block(b) => vec![b],
            _ => vec![],
        }
    }

    pub fn child_blocks_mut(&mut self) -> Vec<&mut Block> {
        match &mut self.kind {
            StmtKind::If { then_block, else_block, .. } => {
                let mut v = vec![then_block];
                v.extend(else_block.iter_mut());
                v
            }
            StmtKind::While { body, .. } => vec![body],
            StmtKind::Block(b) => vec![b],
            _ => vec![],
        }
    }

    /// Pre-order traversal over this statement and all nested statements.
    pub fn walk(&self, f: &mut dyn FnMut(&Stmt)) {
        f(self);
        for b in self.child_blocks() {
            for s in &b.stmts {
                s.walk(f);
            }
        }
    }

    /// Any read or write of `name` in this statement or below.
    pub fn mentions(&self, name: &str) -> bool {
        let mut found = false;
        self.walk(&mut |s| {
            if found {
                return;
            }
            match &s.kind {
                StmtKind::Decl { name: n, .. } if n == name => found = true,
                StmtKind::Assign { target, .. } if target.name() == name => found = true,
                _ => {}
            }
            if s.own_exprs().iter().any(|e| e.mentions(name)) {
                found = true;
            }
        });
        found
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GlobalKind {
    Scalar(i64),
    Array(usize),
}

#[derive(Debug, Clone)]
pub struct GlobalDecl {
    pub name: String,
    pub kind: GlobalKind,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetType {
    Int,
    Void,
}

#[derive(Debug, Clone)]
pub struct FunctionDecl {
    pub name: String,
    pub ret: RetType,
    pub params: Vec<String>,
    pub body: Block,
    pub span: Span,
}

impl PartialEq for GlobalDecl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.kind == other.kind
    }
}

impl PartialEq for FunctionDecl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.ret == other.ret && self.params == other.params && self.body == other.body
    }
}

impl FunctionDecl {
    pub fn walk(&self, f: &mut dyn FnMut(&Stmt)) {
        for s in &self.body.stmts {
            s.walk(f);
        }
    }

    /// Locals in declaration order (pre-order).
    pub fn locals(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.walk(&mut |s| {
            if let StmtKind::Decl { name, .. } = &s.kind {
                out.push(name.clone());
            }
        });
        out
    }
}

/// A parsed MiniLang program.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub globals: Vec<GlobalDecl>,
    pub functions: Vec<FunctionDecl>,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&FunctionDecl> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn global(&self, name: &str) -> Option<&GlobalDecl> {
        self.globals.iter().find(|g| g.name == name)
    }

    /// Every name bound anywhere in the program.
    pub fn all_names(&self) -> std::collections::BTreeSet<String> {
        let mut names: std::collections::BTreeSet<String> =
            self.globals.iter().map(|g| g.name.clone()).collect();
        for f in &self.functions {
            names.insert(f.name.clone());
            names.extend(f.params.iter().cloned());
            names.extend(f.locals());
        }
        names
    }

    /// Reassign node ids in pre-order, statements before their expressions.
    /// The parser numbers nodes the same way, so ids survive an emit/parse cycle.
    pub fn renumber(&mut self) {
        let mut next: NodeId = 0;
        for f in &mut self.functions {
            renumber_block(&mut f.body, &mut next);
        }
    }

    pub fn walk_stmts(&self, f: &mut dyn FnMut(&FunctionDecl, &Stmt)) {
        for func in &self.functions {
            func.walk(&mut |s| f(func, s));
        }
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.walk_stmts(&mut |_, _| n += 1);
        n
    }
}

fn renumber_block(b: &mut Block, next: &mut NodeId) {
    for s in &mut b.stmts {
        s.id = *next;
        *next += 1;
        for e in s.own_exprs_mut() {
            e.walk_mut(&mut |x| {
                x.id = *next;
                *next += 1;
            });
        }
        for cb in s.child_blocks_mut() {
            renumber_block(cb, next);
        }
    }
}

/// Recursively rewrite each block's statement list bottom-up.
pub fn rewrite_blocks(block: &mut Block, f: &mut dyn FnMut(Vec<Stmt>) -> Vec<Stmt>) {
    for s in &mut block.stmts {
        for cb in s.child_blocks_mut() {
            rewrite_blocks(cb, f);
        }
    }
    let stmts = std::mem::take(&mut block.stmts);
    block.stmts = f(stmts);
}
