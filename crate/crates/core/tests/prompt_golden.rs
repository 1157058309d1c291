//! Prompt text is pinned; regenerate with `DEOB_UPDATE_GOLDEN=1 cargo test --test prompt_golden`.

use std::fs;
use std::path::PathBuf;

use deob_core::llm::{build_cot_prompt, PromptMode, PromptOptions};

const SRC: &str = "int g = 3;\nint main() {\n  if (g * g >= 0) {\n    print(g);\n  } else {\n    print(0);\n  }\n  return 0;\n}\n";

fn check(name: &str, opts: PromptOptions) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    let text = build_cot_prompt(SRC, opts).render();
    if std::env::var_os("DEOB_UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, &text).unwrap();
    }
    let golden = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(text, golden, "prompt drifted from {}", path.display());
}

#[test]
fn cot_few_shot_prompt() {
    check("prompt_cot_fewshot.txt", PromptOptions { mode: PromptMode::Cot, few_shot: true });
}

#[test]
fn zero_shot_prompt() {
    check("prompt_zero_shot.txt", PromptOptions { mode: PromptMode::ZeroShot, few_shot: false });
}
