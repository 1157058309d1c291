//! Experiment grids over the corpus: obfuscate, strip identifiers, recover
//! with an engine and score against the original.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::corpus::{Corpus, CorpusProgram, Group};
use crate::deobfuscate::{deobfuscate, DeobReport};
use crate::frontend::{emit, strip_identifiers, Program};
use crate::llm::{run_llm_deobfuscation, ExtractionFailure, LlmClient, PromptOptions};
use crate::metrics::{evaluate_pair, EvalStatus, MetricReport, MetricRow};
use crate::obfuscate::{obfuscate, Mode, Profile, Recipe};

pub const DEFAULT_SEEDS: [u64; 3] = [1, 2, 3];
/// Opaque predicates per program in exp1 opaque modes.
pub const EXP1_K: usize = 10;
pub const EXP2_K_GRID: [usize; 9] = [0, 5, 10, 15, 20, 25, 30, 35, 40];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Static,
    Llm,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Static => "static",
            Engine::Llm => "llm",
        })
    }
}

impl FromStr for Engine {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "static" => Ok(Engine::Static),
            "llm" => Ok(Engine::Llm),
            _ => Err(format!("unknown engine {s:?} (static, llm)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Exp1,
    Exp2,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::Exp1 => "exp1",
            Experiment::Exp2 => "exp2",
        })
    }
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exp1" => Ok(Experiment::Exp1),
            "exp2" => Ok(Experiment::Exp2),
            _ => Err(format!("unknown experiment {s:?} (exp1, exp2)")),
        }
    }
}

/// A grid of obfuscation conditions. `ks` applies to modes with opaque
/// predicates; flattening alone always runs once with K = 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentPlan {
    pub experiment: Experiment,
    pub engines: Vec<Engine>,
    pub seeds: Vec<u64>,
    pub modes: Vec<Mode>,
    pub profiles: Vec<Profile>,
    pub ks: Vec<usize>,
}

impl ExperimentPlan {
    pub fn exp1(engines: Vec<Engine>, seeds: Vec<u64>) -> Self {
        ExperimentPlan {
            experiment: Experiment::Exp1,
            engines,
            seeds,
            modes: Mode::ALL.to_vec(),
            profiles: Profile::ALL.to_vec(),
            ks: vec![EXP1_K],
        }
    }

    pub fn exp2(engines: Vec<Engine>, seeds: Vec<u64>) -> Self {
        ExperimentPlan {
            experiment: Experiment::Exp2,
            engines,
            seeds,
            modes: vec![Mode::Opaque],
            profiles: vec![Profile::Diverse],
            ks: EXP2_K_GRID.to_vec(),
        }
    }

    pub fn new(experiment: Experiment, engines: Vec<Engine>, seeds: Vec<u64>) -> Self {
        match experiment {
            Experiment::Exp1 => Self::exp1(engines, seeds),
            Experiment::Exp2 => Self::exp2(engines, seeds),
        }
    }

    fn ks_for(&self, mode: Mode) -> Vec<usize> {
        if mode.uses_opaque() {
            self.ks.clone()
        } else {
            vec![0]
        }
    }

    /// Every grid point in sort-key order.
    pub fn jobs(&self, corpus: &Corpus) -> Vec<Job> {
        let mut names: Vec<&str> = corpus.programs.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        let mut jobs = Vec::new();
        for name in names {
            for &mode in &self.modes {
                for &profile in &self.profiles {
                    for &seed in &self.seeds {
                        for k in self.ks_for(mode) {
                            for &engine in &self.engines {
                                jobs.push(Job { program: name.to_string(), mode, profile, seed, k, engine });
                            }
                        }
                    }
                }
            }
        }
        jobs.sort();
        jobs.dedup();
        jobs
    }
}

/// One grid point. Field order is the merge order of results.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Job {
    pub program: String,
    pub mode: Mode,
    pub profile: Profile,
    pub seed: u64,
    pub k: usize,
    pub engine: Engine,
}

/// Model access for the `llm` engine.
pub struct LlmEngine {
    pub client: LlmClient,
    pub options: PromptOptions,
}

/// Intermediate artifacts of one job, kept for inspection.
#[derive(Debug, Clone)]
pub struct JobOutcome {
    pub job: Job,
    pub recipe: Option<Recipe>,
    pub obfuscated: Option<Program>,
    pub candidate: Option<Program>,
    pub deob_report: Option<DeobReport>,
    pub row: MetricRow,
}

fn row_for(job: &Job, report: MetricReport) -> MetricRow {
    MetricRow {
        program: job.program.clone(),
        mode: job.mode.to_string(),
        profile: job.profile.to_string(),
        seed: job.seed,
        k: job.k,
        engine: job.engine.to_string(),
        report,
    }
}

/// Run one job. Failures become not-available rows, never panics or errors.
pub fn execute(job: &Job, program: &CorpusProgram, llm: Option<&LlmEngine>) -> JobOutcome {
    let mut out = JobOutcome {
        job: job.clone(),
        recipe: None,
        obfuscated: None,
        candidate: None,
        deob_report: None,
        row: row_for(job, MetricReport::not_available(EvalStatus::Ok)),
    };
    let original = &program.program;
    let (obf, recipe) = match obfuscate(original, job.mode, job.profile, job.seed, job.k) {
        Ok(x) => x,
        Err(e) => {
            out.row.report = MetricReport::not_available(EvalStatus::ObfuscationError(e.to_string()));
            return out;
        }
    };
    let stripped = strip_identifiers(&obf, job.seed);
    out.recipe = Some(recipe);
    out.obfuscated = Some(obf);

    let candidate = match job.engine {
        Engine::Static => {
            let (p, report) = deobfuscate(&stripped);
            out.deob_report = Some(report);
            Ok(p)
        }
        Engine::Llm => match llm {
            None => Err(EvalStatus::BackendError("no model backend configured".into())),
            Some(engine) => {
                let (cand, res) = run_llm_deobfuscation(&emit(&stripped), engine.options, &engine.client);
                match (cand, res.candidate) {
                    (Some(p), _) => Ok(p),
                    (None, Err(ExtractionFailure::Backend(e))) => Err(EvalStatus::BackendError(e)),
                    (None, Err(e)) => Err(EvalStatus::ParseError(e.to_string())),
                    (None, Ok(_)) => unreachable!("candidate mirrors the parse result"),
                }
            }
        },
    };
    out.row.report = match &candidate {
        Ok(p) => evaluate_pair(original, p),
        Err(status) => MetricReport::not_available(status.clone()),
    };
    out.candidate = candidate.ok();
    out
}

/// Run every job of the plan concurrently; results come back in job order.
pub fn run_detailed(plan: &ExperimentPlan, corpus: &Corpus, llm: Option<&LlmEngine>) -> Vec<JobOutcome> {
    let jobs = plan.jobs(corpus);
    jobs.par_iter()
        .map(|job| execute(job, corpus.get(&job.program).expect("job names come from the corpus"), llm))
        .collect()
}

pub fn run_plan(plan: &ExperimentPlan, corpus: &Corpus, llm: Option<&LlmEngine>) -> Vec<MetricRow> {
    run_detailed(plan, corpus, llm).into_iter().map(|o| o.row).collect()
}

pub fn run_exp1(plan: &ExperimentPlan, corpus: &Corpus, llm: Option<&LlmEngine>) -> Vec<MetricRow> {
    debug_assert_eq!(plan.experiment, Experiment::Exp1);
    run_plan(plan, corpus, llm)
}

pub fn run_exp2(plan: &ExperimentPlan, corpus: &Corpus, llm: Option<&LlmEngine>) -> (Vec<MetricRow>, Vec<GroupMean>) {
    debug_assert_eq!(plan.experiment, Experiment::Exp2);
    let rows = run_plan(plan, corpus, llm);
    let means = group_means(&rows, corpus);
    (rows, means)
}

/// Per-group average at one K for one engine. Seeds are averaged within a
/// program first, so every program weighs the same; programs with no
/// available row are left out and not counted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupMean {
    pub group: Group,
    pub k: usize,
    pub engine: String,
    pub programs: usize,
    pub mean_srs: Option<f64>,
    pub mean_bleu: Option<f64>,
}

pub const SUMMARY_HEADER: [&str; 6] = ["group", "K", "engine", "programs", "mean_srs", "mean_bleu"];

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn group_means(rows: &[MetricRow], corpus: &Corpus) -> Vec<GroupMean> {
    // (group, k, engine) -> program -> (srs values, bleu values)
    type PerProgram<'a> = BTreeMap<&'a str, (Vec<f64>, Vec<f64>)>;
    let mut acc: BTreeMap<(Group, usize, &str), PerProgram> = BTreeMap::new();
    for row in rows {
        let Some(p) = corpus.get(&row.program) else { continue };
        let slot = acc.entry((p.group, row.k, row.engine.as_str())).or_default().entry(row.program.as_str()).or_default();
        if let (Some(s), Some(b)) = (row.report.srs(), row.report.bleu) {
            slot.0.push(s);
            slot.1.push(b);
        }
    }
    acc.into_iter()
        .map(|((group, k, engine), per)| {
            let (srs, bleu): (Vec<f64>, Vec<f64>) =
                per.values().filter_map(|(s, b)| Some((mean(s)?, mean(b)?))).unzip();
            GroupMean { group, k, engine: engine.to_string(), programs: srs.len(), mean_srs: mean(&srs), mean_bleu: mean(&bleu) }
        })
        .collect()
}

pub fn write_summary_csv<W: io::Write>(w: W, means: &[GroupMean]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUMMARY_HEADER)?;
    let f = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
    for m in means {
        out.write_record([
            m.group.to_string(),
            m.k.to_string(),
            m.engine.clone(),
            m.programs.to_string(),
            f(m.mean_srs),
            f(m.mean_bleu),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// True when some row could not be scored.
pub fn has_row_failures(rows: &[MetricRow]) -> bool {
    rows.iter().any(|r| r.report.status != EvalStatus::Ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp1_grid_size() {
        let corpus = Corpus::builtin();
        let plan = ExperimentPlan::exp1(vec![Engine::Static, Engine::Llm], DEFAULT_SEEDS.to_vec());
        assert_eq!(plan.jobs(&corpus).len(), 12 * 3 * 2 * 3 * 2);
    }

    #[test]
    fn exp2_grid_is_sorted_and_opaque_only() {
        let corpus = Corpus::builtin();
        let jobs = ExperimentPlan::exp2(vec![Engine::Static], vec![1]).jobs(&corpus);
        assert_eq!(jobs.len(), 9 * 12);
        assert!(jobs.windows(2).all(|w| w[0] < w[1]));
        assert!(jobs.iter().all(|j| j.mode == Mode::Opaque && j.profile == Profile::Diverse));
    }

    #[test]
    fn llm_without_backend_is_not_available() {
        let corpus = Corpus::builtin();
        let p = corpus.get("bfs").unwrap();
        let job = Job { program: "bfs".into(), mode: Mode::Cff, profile: Profile::Limited, seed: 1, k: 0, engine: Engine::Llm };
        let out = execute(&job, p, None);
        assert!(matches!(out.row.report.status, EvalStatus::BackendError(_)));
        assert!(out.row.report.srs().is_none());
    }

    #[test]
    fn too_many_predicates_is_a_row_failure() {
        let corpus = Corpus::builtin();
        let p = corpus.get("bfs").unwrap();
        let job = Job { program: "bfs".into(), mode: Mode::Opaque, profile: Profile::Limited, seed: 1, k: 10_000, engine: Engine::Static };
        let out = execute(&job, p, None);
        assert!(matches!(out.row.report.status, EvalStatus::ObfuscationError(_)));
        assert!(has_row_failures(&[out.row]));
    }

    #[test]
    fn group_means_average_seeds_within_program() {
        let corpus = Corpus::builtin();
        let mk = |program: &str, seed, srs: f64| MetricRow {
            program: program.into(),
            mode: "opaque".into(),
            profile: "diverse".into(),
            seed,
            k: 5,
            engine: "static".into(),
            report: MetricReport {
                similarity: Some(crate::metrics::Similarity {
                    ged: 0,
                    size: 1,
                    d: 1.0 - srs,
                    srs,
                    exactness: crate::metrics::Exactness::Exact,
                }),
                bleu: Some(1.0),
                outputs_equal: true,
                status: EvalStatus::Ok,
            },
        };
        let rows = vec![mk("bfs", 1, 1.0), mk("bfs", 2, 0.0), mk("dfs", 1, 1.0), mk("avl", 1, 0.25)];
        let means = group_means(&rows, &corpus);
        assert_eq!(means.len(), 2);
        assert_eq!((means[0].group, means[0].programs, means[0].mean_srs), (Group::Group1, 2, Some(0.75)));
        assert_eq!((means[1].group, means[1].programs, means[1].mean_srs), (Group::Group2, 1, Some(0.25)));
    }
}
