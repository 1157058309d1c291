//! MiniLang front end: lexing, parsing, canonical printing, normalization
//! and identifier stripping.

pub mod ast;
mod check;
pub mod emit;
pub mod lexer;
pub mod normalize;
pub mod parser;
pub mod strip;

use thiserror::Error;

pub use ast::*;
pub use emit::emit;
pub use lexer::{tokenize, Token};
pub use normalize::normalize;
pub use strip::strip_identifiers;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FrontendError {
    #[error("{span}: lex error: {message}")]
    Lex { span: Span, message: String },
    #[error("{span}: expected one of {expected:?}, found {found}")]
    Parse { span: Span, expected: Vec<String>, found: String },
    #[error("{span}: unresolved name {name}")]
    Name { name: String, span: Span },
    #[error("{span}: duplicate declaration of {name}")]
    Duplicate { name: String, span: Span },
    #[error("{span}: {message}")]
    Type { message: String, span: Span },
    #[error("program has no main function")]
    MissingMain,
}

/// A unit of source text with the place it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub text: String,
    pub origin: String,
}

impl SourceUnit {
    pub fn new(text: impl Into<String>, origin: impl Into<String>) -> Self {
        SourceUnit { text: text.into(), origin: origin.into() }
    }
}

pub fn parse(tokens: &[Token]) -> Result<Program, FrontendError> {
    parser::parse(tokens)
}

/// Tokenize and parse in one step.
pub fn parse_source(src: &str) -> Result<Program, FrontendError> {
    parser::parse(&tokenize(src)?)
}

/// Parse a standalone expression such as a predicate template.
pub fn parse_expression(src: &str) -> Result<Expr, FrontendError> {
    parser::parse_expr(&tokenize(src)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_main() {
        let p = parse_source("int main(){ print(1); return 0; }").unwrap();
        assert_eq!(p.functions.len(), 1);
        assert_eq!(p.functions[0].body.stmts.len(), 2);
    }

    #[test]
    fn unresolved_name() {
        let err = parse_source("int main(){ return x; }").unwrap_err();
        assert!(matches!(err, FrontendError::Name { ref name, .. } if name == "x"));
    }

    #[test]
    fn duplicate_local() {
        let err = parse_source("int main(){ int a = 1; { int a = 2; } return a; }").unwrap_err();
        assert!(matches!(err, FrontendError::Duplicate { .. }));
    }

    #[test]
    fn scope_ends_with_block() {
        let err = parse_source("int main(){ { int a = 1; } return a; }").unwrap_err();
        assert!(matches!(err, FrontendError::Name { .. }));
    }

    #[test]
    fn empty_source_fails_in_parse() {
        assert!(tokenize("").unwrap().is_empty());
        assert_eq!(parse_source(""), Err(FrontendError::MissingMain));
    }

    #[test]
    fn parse_error_reports_expected() {
        match parse_source("int main() { x = ; }") {
            Err(FrontendError::Parse { expected, .. }) => assert!(expected.contains(&"expression".to_string())),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn canonical_text() {
        let p = parse_source("int main(){return 0;}").unwrap();
        assert_eq!(emit(&p), "int main() {\n  return 0;\n}\n");
    }

    #[test]
    fn array_global_before_functions() {
        let p = parse_source("int f() { return a[0]; } int a[8]; int main(){ return f(); }").unwrap();
        let text = emit(&p);
        assert!(text.starts_with("int a[8];\n\nint f() {"));
    }

    #[test]
    fn precedence_and_negatives_round_trip() {
        let src = "int g = -9223372036854775808;\nint main() { int x = 1 - (2 - 3) * -4; int y = -(5); \
                   int z = !(x < y) || x == -y && -x % 3 != 0; print(-(-x)); print(x - -1); return 0; }";
        let p = parse_source(src).unwrap();
        let text = emit(&p);
        let q = parse_source(&text).unwrap();
        assert_eq!(p, q);
        assert_eq!(emit(&q), text);
    }

    #[test]
    fn else_if_chain_round_trips() {
        let src = "int main() { int s = 2; if (s == 0) { print(0); } else if (s == 1) { print(1); } else { print(2); } return 0; }";
        let p = parse_source(src).unwrap();
        let text = emit(&p);
        assert!(text.contains("} else if (s == 1) {"));
        assert_eq!(parse_source(&text).unwrap(), p);
    }

    #[test]
    fn node_ids_unique_and_stable() {
        let p = parse_source("int main(){ int x = 1 + 2; while (x < 9) { x = x * 2; } print(x); return 0; }").unwrap();
        let mut ids = Vec::new();
        p.walk_stmts(&mut |_, s| {
            ids.push(s.id);
            for e in s.own_exprs() {
                e.walk(&mut |x| ids.push(x.id));
            }
        });
        let mut sorted = ids.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), ids.len());
        let q = parse_source(&emit(&p)).unwrap();
        let mut ids2 = Vec::new();
        q.walk_stmts(&mut |_, s| ids2.push(s.id));
        let mut stmt_ids = Vec::new();
        p.walk_stmts(&mut |_, s| stmt_ids.push(s.id));
        assert_eq!(stmt_ids, ids2);
    }

    #[test]
    fn fold_constant_assignment() {
        let p = parse_source("int main(){ int x = 0; x = 2+3; print(x); return 0; }").unwrap();
        let n = normalize(&p);
        assert!(emit(&n).contains("x = 5;"));
    }

    #[test]
    fn constant_if_keeps_then_branch() {
        let p = parse_source("int main(){ if (1) { print(1); } else { print(2); } return 0; }").unwrap();
        let n = normalize(&p);
        assert_eq!(emit(&n), "int main() {\n  print(1);\n  return 0;\n}\n");
        let p = parse_source("int main(){ if (0) { print(1); } return 0; }").unwrap();
        assert_eq!(emit(&normalize(&p)), "int main() {\n  return 0;\n}\n");
    }

    #[test]
    fn folding_wraps_and_keeps_division_by_zero() {
        let p = parse_source("int main(){ print(9223372036854775807 + 1); print(1 / 0); print(!!(3 < 4)); return 0; }").unwrap();
        let text = emit(&normalize(&p));
        assert!(text.contains("print(-9223372036854775808);"));
        assert!(text.contains("print(1 / 0);"));
        assert!(text.contains("print(1);"));
    }

    #[test]
    fn declarations_sink_to_first_definition() {
        let src = "int main() { int t; int i = 0; while (i < 3) { t = i * 2; print(t); i = i + 1; } return 0; }";
        let n = normalize(&parse_source(src).unwrap());
        let text = emit(&n);
        assert!(text.contains("    int t = i * 2;"), "{text}");
        // a value carried across iterations must not be sunk
        let src = "int main() { int t; int i = 0; while (i < 3) { print(t); t = i; i = i + 1; } return 0; }";
        let p = parse_source(src).unwrap();
        assert_eq!(normalize(&p), p);
    }

    #[test]
    fn normalize_is_idempotent() {
        let src = "int main() { int a = 3; { int b = a * (2 + 2); if (!!(b > a)) { print(b); } else { } } while (0) { print(9); } return 0; }";
        let once = normalize(&parse_source(src).unwrap());
        assert_eq!(normalize(&once), once);
    }

    #[test]
    fn strip_renames_everything_but_main() {
        let src = "int total = 0; int add(int a, int b) { int s = a + b; return s; } int main() { total = add(2, 3); print(total); return 0; }";
        let p = parse_source(src).unwrap();
        let s = strip_identifiers(&p, 7);
        let text = emit(&s);
        for old in ["total", "add", "s ", "a +"] {
            assert!(!text.contains(old), "{old} survived in\n{text}");
        }
        assert!(text.contains("int main()"));
        assert!(text.contains("int f0(int p"));
        assert_eq!(emit(&strip_identifiers(&p, 7)), text);
        parse_source(&text).unwrap();
    }
}
