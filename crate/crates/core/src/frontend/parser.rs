use super::ast::*;
use super::lexer::{Keyword, Token, TokenKind};
use super::FrontendError;

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
}

type PResult<T> = Result<T, FrontendError>;

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self, ahead: usize) -> Option<&'a TokenKind> {
        self.tokens.get(self.pos + ahead).map(|t| &t.kind)
    }

    fn span(&self) -> Span {
        match self.peek() {
            Some(t) => t.span,
            None => self.tokens.last().map(|t| Span { start: t.span.end, ..t.span }).unwrap_or_default(),
        }
    }

    fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        Err(FrontendError::Parse {
            span: self.span(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().map(|t| t.lexeme.clone()).unwrap_or_else(|| "end of input".into()),
        })
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.peek_kind(0) == Some(&TokenKind::Punct(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, c: char) -> PResult<()> {
        if self.eat_punct(c) {
            Ok(())
        } else {
            self.error(&[&c.to_string()])
        }
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if matches!(self.peek_kind(0), Some(TokenKind::Op(o)) if *o == op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, k: Keyword) -> bool {
        if self.peek_kind(0) == Some(&TokenKind::Keyword(k)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_ident(&mut self) -> PResult<(String, Span)> {
        match self.peek() {
            Some(Token { kind: TokenKind::Ident(name), span, .. }) => {
                self.pos += 1;
                Ok((name.clone(), *span))
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn signed_literal(&mut self) -> PResult<i64> {
        let negative = self.eat_op("-");
        match self.peek_kind(0) {
            Some(TokenKind::IntLit(v)) => {
                let v = *v;
                self.pos += 1;
                literal_value(v, negative).ok_or(()).or_else(|_| {
                    self.pos -= 1;
                    self.error(&["integer literal below 2^63"])
                })
            }
            _ => self.error(&["integer literal"]),
        }
    }

    fn program(&mut self) -> PResult<Program> {
        let mut program = Program::default();
        while self.peek().is_some() {
            let start = self.span();
            let ret = if self.eat_keyword(Keyword::Int) {
                RetType::Int
            } else if self.eat_keyword(Keyword::Void) {
                RetType::Void
            } else {
                return self.error(&["int", "void"]);
            };
            let (name, _) = self.expect_ident()?;
            if self.eat_punct('(') {
                let mut params = Vec::new();
                if !self.eat_punct(')') {
                    loop {
                        if !self.eat_keyword(Keyword::Int) {
                            return self.error(&["int"]);
                        }
                        params.push(self.expect_ident()?.0);
                        if self.eat_punct(')') {
                            break;
                        }
                        self.expect_punct(',')?;
                    }
                }
                let body = self.block()?;
                program.functions.push(FunctionDecl { name, ret, params, body, span: start });
            } else {
                if ret == RetType::Void {
                    return self.error(&["("]);
                }
                let kind = if self.eat_punct('[') {
                    let len = match self.peek_kind(0) {
                        Some(TokenKind::IntLit(v)) if *v > 0 && *v <= 1 << 24 => *v as usize,
                        _ => return self.error(&["array length"]),
                    };
                    self.pos += 1;
                    self.expect_punct(']')?;
                    GlobalKind::Array(len)
                } else if self.eat_op("=") {
                    GlobalKind::Scalar(self.signed_literal()?)
                } else {
                    GlobalKind::Scalar(0)
                };
                self.expect_punct(';')?;
                program.globals.push(GlobalDecl { name, kind, span: start });
            }
        }
        Ok(program)
    }

    fn block(&mut self) -> PResult<Block> {
        self.expect_punct('{')?;
        let mut stmts = Vec::new();
        while !self.eat_punct('}') {
            if self.peek().is_none() {
                return self.error(&["}"]);
            }
            stmts.push(self.statement()?);
        }
        Ok(Block::new(stmts))
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let span = self.span();
        let kind = match self.peek_kind(0) {
            Some(TokenKind::Keyword(Keyword::Int)) => {
                self.pos += 1;
                let (name, _) = self.expect_ident()?;
                let init = if self.eat_op("=") { Some(self.expr()?) } else { None };
                self.expect_punct(';')?;
                StmtKind::Decl { name, init }
            }
            Some(TokenKind::Keyword(Keyword::If)) => return self.if_statement(),
            Some(TokenKind::Keyword(Keyword::While)) => {
                self.pos += 1;
                self.expect_punct('(')?;
                let cond = self.expr()?;
                self.expect_punct(')')?;
                StmtKind::While { cond, body: self.block()? }
            }
            Some(TokenKind::Keyword(Keyword::Return)) => {
                self.pos += 1;
                let value = if self.eat_punct(';') {
                    None
                } else {
                    let e = self.expr()?;
                    self.expect_punct(';')?;
                    Some(e)
                };
                StmtKind::Return(value)
            }
            Some(TokenKind::Keyword(Keyword::Print)) => {
                self.pos += 1;
                self.expect_punct('(')?;
                let e = self.expr()?;
                self.expect_punct(')')?;
                self.expect_punct(';')?;
                StmtKind::Print(e)
            }
            Some(TokenKind::Punct('{')) => StmtKind::Block(self.block()?),
            Some(TokenKind::Ident(_)) => {
                let (name, _) = self.expect_ident()?;
                if self.eat_punct('(') {
                    let args = self.args()?;
                    self.expect_punct(';')?;
                    StmtKind::Call { name, args }
                } else {
                    let target = if self.eat_punct('[') {
                        let idx = self.expr()?;
                        self.expect_punct(']')?;
                        LValue::Index(name, idx)
                    } else {
                        LValue::Var(name)
                    };
                    if !self.eat_op("=") {
                        return self.error(&["="]);
                    }
                    let value = self.expr()?;
                    self.expect_punct(';')?;
                    StmtKind::Assign { target, value }
                }
            }
            _ => return self.error(&["statement"]),
        };
        Ok(Stmt { id: 0, span, kind })
    }

    fn if_statement(&mut self) -> PResult<Stmt> {
        let span = self.span();
        self.eat_keyword(Keyword::If);
        self.expect_punct('(')?;
        let cond = self.expr()?;
        self.expect_punct(')')?;
        let then_block = self.block()?;
        let else_block = if self.eat_keyword(Keyword::Else) {
            if self.peek_kind(0) == Some(&TokenKind::Keyword(Keyword::If)) {
                Some(Block::new(vec![self.if_statement()?]))
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(Stmt { id: 0, span, kind: StmtKind::If { cond, then_block, else_block } })
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        let mut args = Vec::new();
        if self.eat_punct(')') {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat_punct(')') {
                return Ok(args);
            }
            self.expect_punct(',')?;
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek_kind(0) {
                Some(TokenKind::Op(o)) => match binop(o) {
                    Some(op) if op.precedence() >= min_prec => op,
                    _ => break,
                },
                _ => break,
            };
            let span = self.span();
            self.pos += 1;
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr { id: 0, span, kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let span = self.span();
        if self.eat_op("-") {
            // `-` directly followed by a literal is a negative literal
            if let Some(TokenKind::IntLit(v)) = self.peek_kind(0) {
                let v = *v;
                self.pos += 1;
                let value = match literal_value(v, true) {
                    Some(value) => value,
                    None => return self.error(&["integer literal"]),
                };
                return Ok(Expr { id: 0, span, kind: ExprKind::Int(value) });
            }
            let e = self.unary()?;
            return Ok(Expr { id: 0, span, kind: ExprKind::Unary(UnaryOp::Neg, Box::new(e)) });
        }
        if self.eat_op("!") {
            let e = self.unary()?;
            return Ok(Expr { id: 0, span, kind: ExprKind::Unary(UnaryOp::Not, Box::new(e)) });
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        let kind = match self.peek_kind(0) {
            Some(TokenKind::IntLit(v)) => {
                let v = *v;
                match literal_value(v, false) {
                    Some(value) => {
                        self.pos += 1;
                        ExprKind::Int(value)
                    }
                    None => return self.error(&["integer literal below 2^63"]),
                }
            }
            Some(TokenKind::Ident(_)) => {
                let (name, _) = self.expect_ident()?;
                if self.eat_punct('(') {
                    ExprKind::Call(name, self.args()?)
                } else if self.eat_punct('[') {
                    let idx = self.expr()?;
                    self.expect_punct(']')?;
                    ExprKind::Index(name, Box::new(idx))
                } else {
                    ExprKind::Var(name)
                }
            }
            Some(TokenKind::Punct('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_punct(')')?;
                return Ok(e);
            }
            _ => return self.error(&["expression"]),
        };
        Ok(Expr { id: 0, span, kind })
    }
}

fn literal_value(magnitude: u64, negative: bool) -> Option<i64> {
    match (negative, magnitude) {
        (true, m) if m == 1 << 63 => Some(i64::MIN),
        (_, m) if m >= 1 << 63 => None,
        (true, m) => Some(-(m as i64)),
        (false, m) => Some(m as i64),
    }
}

fn binop(op: &str) -> Option<BinOp> {
    Some(match op {
        "+" => BinOp::Add,
        "-" => BinOp::Sub,
        "*" => BinOp::Mul,
        "/" => BinOp::Div,
        "%" => BinOp::Rem,
        "<" => BinOp::Lt,
        "<=" => BinOp::Le,
        ">" => BinOp::Gt,
        ">=" => BinOp::Ge,
        "==" => BinOp::Eq,
        "!=" => BinOp::Ne,
        "&&" => BinOp::And,
        "||" => BinOp::Or,
        _ => return None,
    })
}

/// Build a syntax tree from tokens, then resolve names. Node ids are
/// assigned in pre-order.
pub fn parse(tokens: &[Token]) -> Result<Program, FrontendError> {
    let mut p = Parser { tokens, pos: 0 };
    let mut program = p.program()?;
    super::check::check(&program)?;
    program.renumber();
    Ok(program)
}

/// Parse a standalone expression. Names are not resolved.
pub fn parse_expr(tokens: &[Token]) -> Result<Expr, FrontendError> {
    let mut p = Parser { tokens, pos: 0 };
    let e = p.expr()?;
    if p.peek().is_some() {
        return p.error(&["end of input"]);
    }
    Ok(e)
}
