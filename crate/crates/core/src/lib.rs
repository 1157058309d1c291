//! Obfuscation and static deobfuscation workbench for MiniLang, a small
//! imperative language, with structural and output-based recovery metrics.

pub mod cfg;
pub mod deobfuscate;
pub mod frontend;
pub mod harness;
pub mod interp;
pub mod llm;
pub mod metrics;
pub mod obfuscate;
