//! Pull a candidate program out of a model response.

use serde::Serialize;
use thiserror::Error;

use super::backend::Usage;
use crate::frontend::{parse_source, Program};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Error)]
#[serde(tag = "kind", content = "detail", rename_all = "kebab-case")]
pub enum ExtractionFailure {
    /// The backend produced no text.
    #[error("backend: {0}")]
    Backend(String),
    #[error("no fenced code block in response")]
    NoCodeBlock,
    #[error("candidate does not parse: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmResult {
    pub raw: String,
    /// Text of the code block that was parsed.
    pub code: Option<String>,
    pub candidate: Result<Program, ExtractionFailure>,
    pub warnings: Vec<String>,
    pub usage: Option<Usage>,
}

impl LlmResult {
    pub fn failed(raw: String, why: ExtractionFailure) -> Self {
        LlmResult { raw, code: None, candidate: Err(why), warnings: vec![], usage: None }
    }
}

/// Contents of every fenced block (``` or ~~~ fences, any info string).
pub fn fenced_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut open: Option<(&str, String)> = None;
    for line in text.lines() {
        let t = line.trim_start();
        match &mut open {
            None => {
                if let Some(fence) = ["```", "~~~"].into_iter().find(|f| t.starts_with(f)) {
                    open = Some((fence, String::new()));
                }
            }
            Some((fence, body)) => {
                if t.trim_end() == *fence {
                    blocks.push(std::mem::take(body));
                    open = None;
                } else {
                    body.push_str(line);
                    body.push('\n');
                }
            }
        }
    }
    blocks
}

/// Take the first fenced block and parse it. Extra blocks are ignored with a warning.
pub fn parse_response(text: &str) -> LlmResult {
    let blocks = fenced_blocks(text);
    let Some(code) = blocks.first().cloned() else {
        return LlmResult::failed(text.to_string(), ExtractionFailure::NoCodeBlock);
    };
    let mut warnings = Vec::new();
    if blocks.len() > 1 {
        warnings.push(format!("response has {} code blocks; using the first", blocks.len()));
    }
    let candidate = parse_source(&code).map_err(|e| ExtractionFailure::Parse(e.to_string()));
    LlmResult { raw: text.to_string(), code: Some(code), candidate, warnings, usage: None }
}
