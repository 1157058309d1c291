use super::ast::Span;
use super::FrontendError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    Int,
    Void,
    If,
    Else,
    While,
    Return,
    Print,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Keyword(Keyword),
    Ident(String),
    /// Magnitude of an integer literal. Kept unsigned so that
    /// `-9223372036854775808` can be formed by the parser.
    IntLit(u64),
    Op(&'static str),
    Punct(char),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub span: Span,
}

const OPERATORS: [&str; 18] = [
    "&&", "||", "==", "!=", "<=", ">=", "<", ">", "+", "-", "*", "/", "%", "!", "=", "&", "|", "^",
];

fn keyword(word: &str) -> Option<Keyword> {
    Some(match word {
        "int" => Keyword::Int,
        "void" => Keyword::Void,
        "if" => Keyword::If,
        "else" => Keyword::Else,
        "while" => Keyword::While,
        "return" => Keyword::Return,
        "print" => Keyword::Print,
        _ => return None,
    })
}

struct Cursor<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl Cursor<'_> {
    fn peek(&self, ahead: usize) -> Option<u8> {
        self.src.get(self.pos + ahead).copied()
    }

    fn bump(&mut self) {
        if self.src[self.pos] == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        self.pos += 1;
    }

    fn here(&self) -> Span {
        Span { start: self.pos, end: self.pos, line: self.line, col: self.col }
    }
}

/// Split source text into tokens. Whitespace and both comment forms are dropped.
pub fn tokenize(src: &str) -> Result<Vec<Token>, FrontendError> {
    let mut cur = Cursor { src: src.as_bytes(), pos: 0, line: 1, col: 1 };
    let mut tokens = Vec::new();

    while let Some(c) = cur.peek(0) {
        if c.is_ascii_whitespace() {
            cur.bump();
            continue;
        }
        if c == b'/' && cur.peek(1) == Some(b'/') {
            while let Some(c) = cur.peek(0) {
                if c == b'\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        if c == b'/' && cur.peek(1) == Some(b'*') {
            let open = cur.here();
            cur.bump();
            cur.bump();
            loop {
                match (cur.peek(0), cur.peek(1)) {
                    (Some(b'*'), Some(b'/')) => {
                        cur.bump();
                        cur.bump();
                        break;
                    }
                    (Some(_), _) => cur.bump(),
                    (None, _) => {
                        return Err(FrontendError::Lex {
                            span: open,
                            message: "unterminated block comment".into(),
                        })
                    }
                }
            }
            continue;
        }

        let mut span = cur.here();
        let kind = if c.is_ascii_alphabetic() || c == b'_' {
            while cur.peek(0).is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_') {
                cur.bump();
            }
            let word = &src[span.start..cur.pos];
            match keyword(word) {
                Some(k) => TokenKind::Keyword(k),
                None => TokenKind::Ident(word.to_string()),
            }
        } else if c.is_ascii_digit() {
            while cur.peek(0).is_some_and(|c| c.is_ascii_digit()) {
                cur.bump();
            }
            let digits = &src[span.start..cur.pos];
            match digits.parse::<u64>() {
                Ok(v) if v <= 1u64 << 63 => TokenKind::IntLit(v),
                _ => {
                    return Err(FrontendError::Lex {
                        span,
                        message: format!("integer literal {digits} out of range"),
                    })
                }
            }
        } else if let Some(op) = OPERATORS
            .iter()
            .find(|op| src.as_bytes()[cur.pos..].starts_with(op.as_bytes()))
        {
            // single `&`, `|`, `^` are not MiniLang operators
            if matches!(*op, "&" | "|" | "^") {
                return Err(FrontendError::Lex {
                    span,
                    message: format!("illegal character '{op}'"),
                });
            }
            for _ in 0..op.len() {
                cur.bump();
            }
            TokenKind::Op(op)
        } else if b"(){}[];,".contains(&c) {
            cur.bump();
            TokenKind::Punct(c as char)
        } else {
            let ch = src[cur.pos..].chars().next().unwrap_or('?');
            return Err(FrontendError::Lex { span, message: format!("illegal character '{ch}'") });
        };
        span.end = cur.pos;
        tokens.push(Token { kind, lexeme: src[span.start..span.end].to_string(), span });
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn declaration_tokens() {
        assert_eq!(
            kinds("int x = 3;"),
            vec![
                TokenKind::Keyword(Keyword::Int),
                TokenKind::Ident("x".into()),
                TokenKind::Op("="),
                TokenKind::IntLit(3),
                TokenKind::Punct(';'),
            ]
        );
    }

    #[test]
    fn empty_source_is_empty_stream() {
        assert!(tokenize("").unwrap().is_empty());
        assert!(tokenize("  // only a comment\n /* and another */ ").unwrap().is_empty());
    }

    #[test]
    fn illegal_character() {
        let err = tokenize("x @ y").unwrap_err();
        match err {
            FrontendError::Lex { span, .. } => assert_eq!(span.start, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unterminated_comment() {
        assert!(matches!(tokenize("int /* x"), Err(FrontendError::Lex { .. })));
    }

    #[test]
    fn spans_ordered_and_disjoint() {
        let toks = tokenize("while (a<=b) { a = a + 1; } // c").unwrap();
        for w in toks.windows(2) {
            assert!(w[0].span.end <= w[1].span.start);
        }
        assert_eq!(toks[3].lexeme, "<=");
    }

    #[test]
    fn literal_limits() {
        assert_eq!(kinds("9223372036854775808"), vec![TokenKind::IntLit(1 << 63)]);
        assert!(tokenize("9223372036854775809").is_err());
    }
}
