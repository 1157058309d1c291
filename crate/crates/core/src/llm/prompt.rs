//! Prompt documents for LLM deobfuscation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::frontend::emit::expr_to_string;
use crate::obfuscate::patterns::{pattern_by_id, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptMode {
    ZeroShot,
    Cot,
}

impl fmt::Display for PromptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PromptMode::ZeroShot => "zero-shot",
            PromptMode::Cot => "cot",
        })
    }
}

impl FromStr for PromptMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "zero-shot" | "zero" => Ok(PromptMode::ZeroShot),
            "cot" => Ok(PromptMode::Cot),
            _ => Err(format!("unknown prompt mode {s:?} (expected zero-shot or cot)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptOptions {
    pub mode: PromptMode,
    pub few_shot: bool,
}

impl Default for PromptOptions {
    fn default() -> Self {
        PromptOptions { mode: PromptMode::Cot, few_shot: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Phase {
    pub title: &'static str,
    pub instructions: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Exemplar {
    pub pattern: &'static str,
    pub source: String,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptDoc {
    pub system: String,
    pub task: String,
    pub phases: Vec<Phase>,
    pub exemplars: Vec<Exemplar>,
    pub source: String,
    pub format_directive: String,
}

const SYSTEM: &str = "You are a reverse engineer who restores obfuscated programs written in MiniLang, \
a small C-like language with int globals, int arrays, int and void functions, if/else, while, return and print.";

const TASK: &str = "Rewrite the program below so that its control flow is plain structured code \
with the obfuscation removed. The result must print exactly what the input prints.";

pub const PHASES: [Phase; 5] = [
    Phase {
        title: "Phase 1: Detect obfuscation",
        instructions: "Walk the syntax tree. Look for a loop that tests one integer variable against a constant \
and branches on that same variable inside: that is a dispatcher and the variable is its state. \
List every branch condition built only from globals that are never reassigned. Say which transformations are present, if any.",
    },
    Phase {
        title: "Phase 2: Recover the state graph",
        instructions: "For each dispatcher arm, write down the state label it handles, the statements it runs, \
and the next state it selects, with the condition guarding each choice. Find the state held when the loop is first entered.",
    },
    Phase {
        title: "Phase 3: Rebuild structured control flow",
        instructions: "Find the transitions that jump back to an earlier state; they are loops. \
Order the remaining states so each one follows its predecessors, then turn two-way transitions into if/else \
and back jumps into while loops.",
    },
    Phase {
        title: "Phase 4: Remove opaque predicates",
        instructions: "For each condition listed in phase 1, decide whether it holds for every possible value of its operands \
and say why. Keep only the branch that always runs and delete the other one.",
    },
    Phase {
        title: "Phase 5: Clean up",
        instructions: "Delete the state variable, the operands of removed predicates and any variable that is no longer read. \
Simplify constant expressions and keep the original function signatures.",
    },
];

const FORMAT: &str = "Answer with the complete program in a single fenced code block. \
Reasoning, if any, goes before the block.";

const EXEMPLAR_PATTERNS: [(&str, i64, i64); 2] = [("square-nonneg", 7, 0), ("consecutive-odd", 12, 0)];

fn exemplar(id: &'static str, x: i64, y: i64) -> Exemplar {
    let p = pattern_by_id(id).expect("exemplar from the pattern library");
    let operands: Vec<String> = ["g1", "g2"][..p.arity].iter().map(|n| n.to_string()).collect();
    let cond = expr_to_string(&p.instantiate(&operands));
    let mut globals = format!("int g1 = {x};\n");
    if p.arity == 2 {
        globals.push_str(&format!("int g2 = {y};\n"));
    }
    let source = format!(
        "{globals}int main() {{\n  if ({cond}) {{\n    print(1);\n  }} else {{\n    print(2);\n  }}\n  return 0;\n}}\n"
    );
    let (kept, reason) = match (id, p.outcome) {
        ("square-nonneg", _) => ("then", "g1 is never reassigned and lies in [0, 2^31), where g1 * g1 does not overflow, so the square is never negative"),
        ("consecutive-odd", _) => ("else", "g1 * (g1 + 1) multiplies two consecutive integers, one of them even, and wrapping keeps the product even"),
        (_, Outcome::True) => ("then", "the condition holds for every operand value"),
        (_, Outcome::False) => ("else", "the condition fails for every operand value"),
    };
    let explanation = format!(
        "`{cond}` is always {}: {reason}. Only the {kept} branch can run, so the result is `print({})`.",
        p.outcome,
        if kept == "then" { 1 } else { 2 }
    );
    Exemplar { pattern: p.id, source, explanation }
}

pub fn build_cot_prompt(source: &str, opts: PromptOptions) -> PromptDoc {
    let cot = opts.mode == PromptMode::Cot;
    PromptDoc {
        system: SYSTEM.to_string(),
        task: TASK.to_string(),
        phases: if cot { PHASES.to_vec() } else { vec![] },
        exemplars: if opts.few_shot { EXEMPLAR_PATTERNS.iter().map(|&(id, x, y)| exemplar(id, x, y)).collect() } else { vec![] },
        source: source.to_string(),
        format_directive: FORMAT.to_string(),
    }
}

impl PromptDoc {
    /// User message text.
    pub fn user_message(&self) -> String {
        let mut out = format!("{}\n", self.task);
        if !self.phases.is_empty() {
            out.push_str("\nWork through these phases in order and show your reasoning for each.\n");
            for p in &self.phases {
                out.push_str(&format!("\n## {}\n{}\n", p.title, p.instructions));
            }
        }
        if !self.exemplars.is_empty() {
            out.push_str("\n## Examples of opaque predicates\n");
            for (i, e) in self.exemplars.iter().enumerate() {
                out.push_str(&format!("\nExample {}:\n```\n{}```\n{}\n", i + 1, e.source, e.explanation));
            }
        }
        out.push_str(&format!("\n## Program\n```\n{}", self.source));
        if !self.source.ends_with('\n') {
            out.push('\n');
        }
        out.push_str(&format!("```\n\n{}\n", self.format_directive));
        out
    }

    /// Both messages as one text, for logs and golden files.
    pub fn render(&self) -> String {
        format!("[system]\n{}\n\n[user]\n{}", self.system, self.user_message())
    }

    /// SHA-256 of the rendered prompt, hex encoded; keys replay transcripts.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.render().as_bytes()))
    }
}
