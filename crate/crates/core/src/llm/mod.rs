//! LLM deobfuscation: prompt construction, completion backends and response parsing.

pub mod backend;
pub mod prompt;
pub mod response;

pub use backend::{BackendConfig, BackendKind, Completion, LlmClient, LlmError, Transcript, TranscriptRecord, Usage};
pub use prompt::{build_cot_prompt, PromptDoc, PromptMode, PromptOptions};
pub use response::{fenced_blocks, parse_response, ExtractionFailure, LlmResult};

use crate::frontend::Program;

/// Build the prompt, complete it and parse the answer. Backend errors become
/// an extraction failure so callers report them as not available.
pub fn run_llm_deobfuscation(source: &str, opts: PromptOptions, client: &LlmClient) -> (Option<Program>, LlmResult) {
    let doc = build_cot_prompt(source, opts);
    let result = match client.complete(&doc) {
        Ok(c) => LlmResult { usage: c.usage, ..parse_response(&c.text) },
        Err(e) => LlmResult::failed(String::new(), ExtractionFailure::Backend(e.to_string())),
    };
    (result.candidate.clone().ok(), result)
}
