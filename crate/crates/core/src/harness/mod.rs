//! Benchmark corpus and experiment runners.

pub mod corpus;
pub mod experiment;

pub use corpus::{Corpus, CorpusError, CorpusProgram, Group};
pub use experiment::{
    execute, group_means, has_row_failures, run_detailed, run_exp1, run_exp2, run_plan, write_summary_csv, Engine, Experiment,
    ExperimentPlan, GroupMean, Job, JobOutcome, LlmEngine, DEFAULT_SEEDS, EXP1_K, EXP2_K_GRID, SUMMARY_HEADER,
};
