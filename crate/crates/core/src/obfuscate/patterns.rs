//! Opaque predicate templates over operands `x` and `y`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::frontend::{parse_expression, Expr, ExprKind};

use super::Profile;

/// Fixed branch outcome of a predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    True,
    False,
}

impl Outcome {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Outcome::True
        } else {
            Outcome::False
        }
    }

    pub fn as_bool(self) -> bool {
        self == Outcome::True
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.as_bool() { "true" } else { "false" })
    }
}

/// How the invariance of a pattern is established.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Every operand in `[lo, hi)`; all combinations are enumerated.
    Bounded { lo: i64, hi: i64 },
    /// All 64-bit values. The template reduces mod 2 to a polynomial whose
    /// parity depends only on operand parity, so both residues plus a dense
    /// window and the wrap boundaries are evaluated.
    Full,
}

impl Domain {
    /// Range used when drawing constant operands.
    pub fn sample_range(self) -> (i64, i64) {
        match self {
            Domain::Bounded { lo, hi } => (lo, hi),
            Domain::Full => (-(1 << 31), 1 << 31),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PredicatePattern {
    pub id: &'static str,
    /// Source text over `x` (and `y` for two-operand forms).
    pub template: &'static str,
    pub arity: usize,
    pub outcome: Outcome,
    pub domain: Domain,
    /// The same formula written directly in Rust; cross-checked against the template.
    pub native: fn(i64, i64) -> bool,
}

const SQ_DOMAIN: Domain = Domain::Bounded { lo: 0, hi: 1 << 31 };
const PAIR_DOMAIN: Domain = Domain::Bounded { lo: 0, hi: 1 << 12 };

pub const PATTERNS: [PredicatePattern; 8] = [
    PredicatePattern {
        id: "square-nonneg",
        template: "x * x >= 0",
        arity: 1,
        outcome: Outcome::True,
        domain: SQ_DOMAIN,
        native: |x, _| x.wrapping_mul(x) >= 0,
    },
    PredicatePattern {
        id: "consecutive-even",
        template: "x * (x + 1) % 2 == 0",
        arity: 1,
        outcome: Outcome::True,
        domain: Domain::Full,
        native: |x, _| x.wrapping_mul(x.wrapping_add(1)) % 2 == 0,
    },
    PredicatePattern {
        id: "consecutive-odd",
        template: "x * (x + 1) % 2 == 1",
        arity: 1,
        outcome: Outcome::False,
        domain: Domain::Full,
        native: |x, _| x.wrapping_mul(x.wrapping_add(1)) % 2 == 1,
    },
    PredicatePattern {
        id: "square-negative",
        template: "x * x < 0",
        arity: 1,
        outcome: Outcome::False,
        domain: SQ_DOMAIN,
        native: |x, _| x.wrapping_mul(x) < 0,
    },
    PredicatePattern {
        id: "sum-of-squares-nonneg",
        template: "x * x + y * y >= 0",
        arity: 2,
        outcome: Outcome::True,
        domain: PAIR_DOMAIN,
        native: |x, y| x.wrapping_mul(x).wrapping_add(y.wrapping_mul(y)) >= 0,
    },
    PredicatePattern {
        id: "difference-square-negative",
        template: "(x - y) * (x - y) < 0",
        arity: 2,
        outcome: Outcome::False,
        domain: PAIR_DOMAIN,
        native: |x, y| {
            let d = x.wrapping_sub(y);
            d.wrapping_mul(d) < 0
        },
    },
    PredicatePattern {
        id: "square-plus-self-even",
        template: "(x * x + x) % 2 == 0",
        arity: 1,
        outcome: Outcome::True,
        domain: Domain::Full,
        native: |x, _| x.wrapping_mul(x).wrapping_add(x) % 2 == 0,
    },
    PredicatePattern {
        id: "cube-minus-self-even",
        template: "(x * x * x - x) % 2 == 0",
        arity: 1,
        outcome: Outcome::True,
        domain: Domain::Full,
        native: |x, _| x.wrapping_mul(x).wrapping_mul(x).wrapping_sub(x) % 2 == 0,
    },
];

/// Patterns available to a profile. `limited` has only the two classic
/// always-true forms.
pub fn pattern_library(profile: Profile) -> Vec<PredicatePattern> {
    match profile {
        Profile::Limited => PATTERNS[..2].to_vec(),
        Profile::Diverse => PATTERNS.to_vec(),
    }
}

pub fn pattern_by_id(id: &str) -> Option<PredicatePattern> {
    PATTERNS.iter().find(|p| p.id == id).copied()
}

impl PredicatePattern {
    /// The template with `x` and `y` renamed to the given operand names.
    pub fn instantiate(&self, operands: &[String]) -> Expr {
        let mut e = parse_expression(self.template).expect("templates parse");
        e.walk_mut(&mut |n| {
            if let ExprKind::Var(v) = &mut n.kind {
                let slot = if v == "x" { 0 } else { 1 };
                *v = operands[slot].clone();
            }
        });
        e
    }

    /// Operand values on which the declared outcome is checked.
    pub fn check_points(&self) -> Box<dyn Iterator<Item = (i64, i64)>> {
        match (self.domain, self.arity) {
            (Domain::Bounded { lo, hi }, 1) => Box::new((lo..hi).map(|x| (x, 0))),
            (Domain::Bounded { lo, hi }, _) => Box::new((lo..hi).flat_map(move |x| (lo..hi).map(move |y| (x, y)))),
            (Domain::Full, _) => {
                let edges = [i64::MIN, i64::MIN + 1, i64::MIN + 2, i64::MAX - 1, i64::MAX, -(1 << 31), 1 << 31];
                Box::new((-(1i64 << 12)..(1 << 12)).chain(edges).map(|x| (x, 0)))
            }
        }
    }

    /// Every check point evaluates to the declared outcome.
    pub fn verify(&self) -> bool {
        let want = self.outcome.as_bool();
        self.check_points().all(|(x, y)| (self.native)(x, y) == want)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::normalize::fold_expr;

    fn eval_template(p: &PredicatePattern, x: i64, y: i64) -> bool {
        let mut e = parse_expression(p.template).unwrap();
        e.walk_mut(&mut |n| {
            if let ExprKind::Var(v) = &n.kind {
                n.kind = ExprKind::Int(if v == "x" { x } else { y });
            }
        });
        fold_expr(&mut e);
        e.as_int().expect("closed expression folds") != 0
    }

    #[test]
    fn native_forms_agree_with_templates() {
        let probes = [0, 1, 2, 3, -1, -2, 7, 4095, 1 << 31, (1 << 31) - 1, 3037000499, 3037000500, i64::MAX, i64::MIN, i64::MIN + 1];
        for p in PATTERNS {
            for &x in &probes {
                for &y in &probes {
                    assert_eq!((p.native)(x, y), eval_template(&p, x, y), "{} at ({x}, {y})", p.id);
                }
            }
        }
    }

    #[test]
    fn limited_profile_has_the_two_classic_forms() {
        let lib = pattern_library(Profile::Limited);
        let templates: Vec<&str> = lib.iter().map(|p| p.template).collect();
        assert_eq!(templates, ["x * x >= 0", "x * (x + 1) % 2 == 0"]);
        assert!(lib.iter().all(|p| p.outcome == Outcome::True));
    }

    #[test]
    fn diverse_profile_has_false_and_binary_forms() {
        let lib = pattern_library(Profile::Diverse);
        assert!(lib.len() >= 6);
        assert!(lib.iter().any(|p| p.template == "x * (x + 1) % 2 == 1" && p.outcome == Outcome::False));
        assert!(lib.iter().any(|p| p.arity == 2));
    }

    #[test]
    fn square_wraps_outside_declared_domain() {
        let p = pattern_by_id("square-nonneg").unwrap();
        assert!(!(p.native)(3037000500, 0));
    }

    #[test]
    fn full_domain_patterns_hold() {
        for p in PATTERNS.iter().filter(|p| p.domain == Domain::Full) {
            assert!(p.verify(), "{}", p.id);
        }
    }

    #[test]
    fn instantiate_renames_operands() {
        let p = pattern_by_id("sum-of-squares-nonneg").unwrap();
        let e = p.instantiate(&["a".into(), "b".into()]);
        assert_eq!(crate::frontend::emit::expr_to_string(&e), "a * a + b * b >= 0");
    }
}
